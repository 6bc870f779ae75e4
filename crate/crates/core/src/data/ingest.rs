use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frontend::{featurize, load_wav, read_wav_samples, AudioClip, MfccConfig, MfccExtractor, CLIP_SAMPLES, SAMPLE_RATE_HZ};

use super::{fnv1a32, split_for, Dataset, Example, LabelMap, Split, SILENCE, UNKNOWN};

pub const BACKGROUND_NOISE_DIR: &str = "_background_noise_";

/// Train, val and test sets plus the WAV files that could not be decoded.
#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
    pub skipped: Vec<PathBuf>,
}

impl Splits {
    pub fn get(&self, split: Split) -> &Dataset {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }
}

struct Entry {
    path: PathBuf,
    source: String,
    label: usize,
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<_>>()?;
    out.sort();
    Ok(out)
}

fn is_wav(path: &Path) -> bool {
    path.is_file() && path.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav"))
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Unknown-word clips kept per split: an eighth of the keyword clips, which
/// makes `_unknown_` and `_silence_` roughly a tenth of the split each.
fn unknown_quota(keywords: usize) -> usize {
    keywords.div_ceil(8)
}

/// Scans `<root>/<word>/*.wav` and `<root>/_background_noise_/*.wav`.
///
/// Unknown words are thinned to the quota by ranking on a hash of their
/// relative path. Silence crops are drawn from a split-private slice of each
/// noise file (first 80 %, next 10 %, last 10 % of its samples) so no noise
/// audio is shared between splits.
pub fn ingest_speech_commands(root: impl AsRef<Path>, labels: &LabelMap) -> Result<Splits> {
    let root = root.as_ref();
    if !root.is_dir() {
        return Err(Error::MissingDirectory(root.to_path_buf()));
    }
    let mut keyword: [Vec<Entry>; 3] = Default::default();
    let mut unknown: [Vec<Entry>; 3] = Default::default();
    let mut noise = Vec::new();
    for dir in sorted_entries(root)?.into_iter().filter(|p| p.is_dir()) {
        let word = file_name(&dir);
        let wavs = sorted_entries(&dir)?.into_iter().filter(|p| is_wav(p));
        if word == BACKGROUND_NOISE_DIR {
            noise.extend(wavs);
            continue;
        }
        for path in wavs {
            let base = file_name(&path);
            let split = split_for(&base) as usize;
            let label = labels.label_for_word(&word);
            let entry = Entry {
                source: format!("{word}/{base}"),
                path,
                label,
            };
            if label == UNKNOWN {
                unknown[split].push(entry);
            } else {
                keyword[split].push(entry);
            }
        }
    }
    if keyword.iter().chain(&unknown).all(Vec::is_empty) {
        return Err(Error::NoValidFiles(root.to_path_buf()));
    }

    let extractor = MfccExtractor::new(MfccConfig::default(), SAMPLE_RATE_HZ)?;
    let noise_clips: Vec<(String, Vec<f32>)> = noise
        .iter()
        .filter_map(|p| match read_wav_samples(p) {
            Ok(pcm) if pcm.sample_rate_hz == SAMPLE_RATE_HZ => Some(Ok((file_name(p), pcm.samples))),
            Ok(_) | Err(Error::MalformedWav(_)) | Err(Error::UnsupportedFormat(_)) => None,
            Err(e) => Some(Err(e)),
        })
        .collect::<Result<_>>()?;

    let mut skipped = Vec::new();
    let mut sets = Vec::with_capacity(3);
    for split in Split::ALL {
        let s = split as usize;
        let mut chosen = std::mem::take(&mut keyword[s]);
        let quota = unknown_quota(chosen.len());
        let mut unk = std::mem::take(&mut unknown[s]);
        unk.sort_by_key(|e| (fnv1a32(e.source.as_bytes()), e.source.clone()));
        unk.truncate(quota);
        let silence_count = unk.len();
        chosen.extend(unk);
        chosen.sort_by(|a, b| a.source.cmp(&b.source));

        let featurized: Vec<Result<Option<Example>>> = chosen
            .par_iter()
            .map(|e| match load_wav(&e.path) {
                Ok(clip) => Ok(Some(Example {
                    features: featurize(&clip, &extractor)?,
                    label: e.label,
                    source: e.source.clone(),
                })),
                Err(Error::MalformedWav(_)) | Err(Error::UnsupportedFormat(_)) => Ok(None),
                Err(err) => Err(err),
            })
            .collect();
        let mut examples = Vec::with_capacity(chosen.len() + silence_count);
        for (entry, ex) in chosen.iter().zip(featurized) {
            match ex? {
                Some(ex) => examples.push(ex),
                None => skipped.push(entry.path.clone()),
            }
        }
        examples.extend(silence_crops(&noise_clips, split, silence_count, &extractor)?);
        sets.push(Dataset::new(split, examples));
    }
    if sets.iter().all(Dataset::is_empty) {
        return Err(Error::NoValidFiles(root.to_path_buf()));
    }
    let mut sets = sets.into_iter();
    Ok(Splits {
        train: sets.next().unwrap(),
        val: sets.next().unwrap(),
        test: sets.next().unwrap(),
        skipped,
    })
}

fn silence_crops(noise: &[(String, Vec<f32>)], split: Split, count: usize, extractor: &MfccExtractor) -> Result<Vec<Example>> {
    if noise.is_empty() || count == 0 {
        return Ok(Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(u64::from(fnv1a32(split.to_string().as_bytes())));
    let picks: Vec<(usize, usize, usize)> = (0..count)
        .map(|i| {
            let f = i % noise.len();
            let len = noise[f].1.len();
            let (lo, hi) = match split {
                Split::Train => (0, len * 8 / 10),
                Split::Val => (len * 8 / 10, len * 9 / 10),
                Split::Test => (len * 9 / 10, len),
            };
            let span = (hi - lo).saturating_sub(CLIP_SAMPLES);
            let start = lo + rng.random_range(0..=span);
            (f, start, (start + CLIP_SAMPLES).min(hi))
        })
        .collect();
    picks
        .into_par_iter()
        .map(|(f, start, end)| {
            let (name, samples) = &noise[f];
            let clip = AudioClip::new(samples[start..end].to_vec(), SAMPLE_RATE_HZ)?;
            Ok(Example {
                features: featurize(&clip, extractor)?,
                label: SILENCE,
                source: format!("{BACKGROUND_NOISE_DIR}/{name}@{start}"),
            })
        })
        .collect()
}
