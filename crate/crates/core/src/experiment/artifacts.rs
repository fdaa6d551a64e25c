use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::tensor::{RecordMeta, TensorFile};
use crate::error::{Error, Result};
use crate::learner::Example;
use crate::naming_stats::{CategoryInventory, Condition};
use crate::rng;
use crate::world::{sample_pair, AudiovisualPair, DatasetManifest, TestItem, TestSets, World};

/// Category label of filler-word frames in audio tensor files.
pub const FILLER_CATEGORY: u32 = u32::MAX;

/// Output directory layout.
#[derive(Debug, Clone)]
pub struct Paths {
    pub root: PathBuf,
}

impl Paths {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn stats(&self, bin: &str) -> PathBuf {
        self.root.join("stats").join(format!("{bin}.csv"))
    }
    pub fn data(&self) -> PathBuf {
        self.root.join("data")
    }
    pub fn inventory(&self) -> PathBuf {
        self.data().join("inventory.jsonl")
    }
    pub fn lexicon(&self) -> PathBuf {
        self.data().join("lexicon.json")
    }
    pub fn pool(&self) -> PathBuf {
        self.data().join("pool.jsonl")
    }
    pub fn pool_audio(&self) -> PathBuf {
        self.data().join("pool.audio.tns")
    }
    pub fn pool_visual(&self) -> PathBuf {
        self.data().join("pool.visual.tns")
    }
    pub fn splits(&self) -> PathBuf {
        self.data().join("splits.json")
    }
    pub fn manifest(&self, bin: &str) -> PathBuf {
        self.data().join(format!("{bin}.manifest.jsonl"))
    }
    pub fn test_set(&self, name: &str) -> PathBuf {
        self.data().join("tests").join(format!("{name}.tns"))
    }
    pub fn checkpoint(&self, bin: &str, which: &str) -> PathBuf {
        self.root.join("checkpoints").join(format!("{bin}.{which}.ckpt"))
    }
    pub fn trace(&self, bin: &str) -> PathBuf {
        self.root.join("traces").join(format!("{bin}.trace.csv"))
    }
    pub fn report(&self, bin: &str) -> PathBuf {
        self.root.join("reports").join(format!("{bin}.json"))
    }
    pub fn category_table(&self, bin: &str) -> PathBuf {
        self.root.join("reports").join(format!("{bin}.categories.csv"))
    }
    pub fn vocab_curves(&self) -> PathBuf {
        self.root.join("curves").join("vocab.csv")
    }
    pub fn score_curves(&self) -> PathBuf {
        self.root.join("curves").join("scores.csv")
    }
    pub fn gradcheck(&self) -> PathBuf {
        self.root.join("gradcheck.json")
    }
}

pub(crate) fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, contents)?;
    Ok(())
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingArtifact(path.to_path_buf()),
        _ => Error::Io(e),
    })
}

/// Advisory lock on an output directory, released on drop.
#[derive(Debug)]
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub fn acquire(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        let path = root.join(".lock");
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id())?;
                Ok(Self { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Locked(path)),
            Err(e) => Err(Error::Io(e)),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

// ---- pool -------------------------------------------------------------

/// Named categories for one pair: distinct, drawn by a mixture of the
/// daily-rate distribution and a uniform one.
fn draw_named(weights: &[f64], n: usize, rng: &mut rng::Rng) -> Vec<u32> {
    let mut w = weights.to_vec();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n.min(w.len()) {
        let total: f64 = w.iter().sum();
        let mut u = rng.random_range(0.0..total);
        let mut pick = w.len() - 1;
        for (i, &wi) in w.iter().enumerate() {
            if wi > 0.0 && u < wi {
                pick = i;
                break;
            }
            u -= wi;
        }
        while w[pick] == 0.0 {
            pick -= 1;
        }
        w[pick] = 0.0;
        out.push(pick as u32);
    }
    out
}

/// Candidate pairs, each from its own stream derived from `(seed, pair_id)`.
pub fn generate_pool(world: &World, size: usize, uniform_mix: f64, seed: u64) -> Vec<AudiovisualPair> {
    let rates = world.inventory.daily_rates();
    let total: f64 = rates.iter().sum();
    let c = rates.len() as f64;
    let weights: Vec<f64> = rates.iter().map(|r| (1.0 - uniform_mix) * r / total + uniform_mix / c).collect();
    let cfg = &world.config;
    (0..size as u64)
        .map(|id| {
            let mut r = rng::rng_from(rng::derive_indexed(seed, id));
            let n_named = cfg.named_per_utterance.sample(&mut r);
            let named = draw_named(&weights, n_named, &mut r);
            let present: Vec<u32> =
                named.iter().copied().filter(|_| r.random_bool(cfg.referent_present_prob)).collect();
            let speaker = r.random_range(0..world.speakers.len() as u32);
            sample_pair(world, id, &present, &named, speaker, &mut r)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectRecord {
    pub category: u32,
    pub area: f64,
    /// Record index in the visual tensor file.
    pub row: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenRecord {
    pub word: String,
    pub category: Option<u32>,
    /// First frame's record index in the audio tensor file.
    pub row: usize,
    pub n_frames: usize,
}

/// One pair per manifest line; feature vectors live in the sidecars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairRecord {
    pub pair_id: u64,
    pub speaker: u32,
    pub objects: Vec<ObjectRecord>,
    pub tokens: Vec<TokenRecord>,
    pub incidence: Vec<u32>,
}

impl PairRecord {
    pub fn n_frames(&self) -> usize {
        self.tokens.iter().map(|t| t.n_frames).sum()
    }

    pub fn has_cooccurrence(&self) -> bool {
        self.incidence.iter().any(|&c| c > 0)
    }
}

/// Pool pairs as manifest records plus audio and visual sidecars.
pub fn pool_records(
    pool: &[AudiovisualPair],
    phone_dim: usize,
    visual_dim: usize,
) -> Result<(Vec<PairRecord>, TensorFile, TensorFile)> {
    let mut audio = TensorFile::new(phone_dim);
    let mut visual = TensorFile::new(visual_dim);
    let mut records = Vec::with_capacity(pool.len());
    for p in pool {
        let token_id = u32::try_from(p.pair_id).map_err(|_| Error::InvalidInput("pair id exceeds 32 bits".into()))?;
        let mut objects = Vec::with_capacity(p.scene.objects.len());
        for o in &p.scene.objects {
            let row = visual
                .push(RecordMeta { category: o.category, speaker: p.utterance.speaker, token_id }, &o.features)?;
            objects.push(ObjectRecord { category: o.category, area: o.area, row });
        }
        let mut tokens = Vec::with_capacity(p.utterance.tokens.len());
        for t in &p.utterance.tokens {
            let meta =
                RecordMeta { category: t.category.unwrap_or(FILLER_CATEGORY), speaker: p.utterance.speaker, token_id };
            let mut first = audio.len();
            for (i, frame) in t.frames.chunks(phone_dim).enumerate() {
                let row = audio.push(meta, frame)?;
                if i == 0 {
                    first = row;
                }
            }
            tokens.push(TokenRecord { word: t.word.clone(), category: t.category, row: first, n_frames: t.n_frames });
        }
        records.push(PairRecord {
            pair_id: p.pair_id,
            speaker: p.utterance.speaker,
            objects,
            tokens,
            incidence: p.incidence.clone(),
        });
    }
    Ok((records, audio, visual))
}

pub fn write_jsonl<T: Serialize>(path: &Path, header: Option<&impl Serialize>, rows: &[T]) -> Result<()> {
    let mut out = Vec::new();
    if let Some(h) = header {
        serde_json::to_writer(&mut out, h)?;
        out.push(b'\n');
    }
    for r in rows {
        serde_json::to_writer(&mut out, r)?;
        out.push(b'\n');
    }
    write_file(path, out)
}

fn open_lines(path: &Path) -> Result<std::io::Lines<BufReader<File>>> {
    let f = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingArtifact(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    Ok(BufReader::new(f).lines())
}

pub fn read_pool(path: &Path) -> Result<Vec<PairRecord>> {
    open_lines(path)?.map(|l| Ok(serde_json::from_str(&l?)?)).collect()
}

/// First line of a bin manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestHeader {
    pub bin: String,
    pub condition: Condition,
    pub duration_days: u32,
    pub n_pairs: usize,
    pub targets: Vec<u64>,
    pub achieved: Vec<u64>,
    pub deficit: Vec<u64>,
    pub audio: String,
    pub visual: String,
}

impl ManifestHeader {
    pub fn from_manifest(bin: &str, m: &DatasetManifest) -> Self {
        Self {
            bin: bin.to_string(),
            condition: m.condition,
            duration_days: m.duration_days,
            n_pairs: m.pair_ids.len(),
            targets: m.targets.clone(),
            achieved: m.achieved.clone(),
            deficit: m.deficit.clone(),
            audio: "pool.audio.tns".into(),
            visual: "pool.visual.tns".into(),
        }
    }
}

pub fn read_manifest(path: &Path) -> Result<(ManifestHeader, Vec<PairRecord>)> {
    let mut lines = open_lines(path)?;
    let header: ManifestHeader = match lines.next() {
        Some(l) => serde_json::from_str(&l?)?,
        None => return Err(Error::malformed("manifest", "empty file")),
    };
    let rows: Vec<PairRecord> = lines.map(|l| Ok(serde_json::from_str(&l?)?)).collect::<Result<_>>()?;
    if rows.len() != header.n_pairs {
        return Err(Error::malformed(
            "manifest",
            format!("header lists {} pairs, found {}", header.n_pairs, rows.len()),
        ));
    }
    Ok((header, rows))
}

/// Training examples for `records`, reading features from the sidecars.
pub fn load_examples(
    records: &[PairRecord],
    audio: &TensorFile,
    visual: &TensorFile,
    with_scenes: bool,
) -> Result<Vec<Example>> {
    records
        .iter()
        .map(|r| {
            let mut frames = Vec::with_capacity(r.n_frames() * audio.dim());
            for t in &r.tokens {
                frames.extend(audio.rows_f64(t.row, t.n_frames)?);
            }
            let mut features = Vec::new();
            if with_scenes {
                for o in &r.objects {
                    features.extend(visual.rows_f64(o.row, 1)?);
                }
            }
            Ok(Example {
                n_frames: r.n_frames(),
                frames,
                n_objects: if with_scenes { r.objects.len() } else { 0 },
                features,
            })
        })
        .collect()
}

/// Validation and auditory-corpus membership by pair id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Splits {
    pub validation: Vec<u64>,
    pub auditory: Vec<u64>,
}

// ---- test sets ----------------------------------------------------------

pub const TEST_SET_NAMES: [&str; 4] = ["lextest", "semtest_words", "semtest_objects", "abx"];

pub fn items_to_tensor(items: &[TestItem], dim: usize) -> Result<TensorFile> {
    let mut t = TensorFile::new(dim);
    for it in items {
        let token_id = u32::try_from(it.id).map_err(|_| Error::InvalidInput("test id exceeds 32 bits".into()))?;
        let meta = RecordMeta { category: it.label, speaker: it.speaker, token_id };
        for row in it.frames.chunks(dim) {
            t.push(meta, row)?;
        }
    }
    Ok(t)
}

/// Consecutive records sharing a token id form one item.
pub fn tensor_to_items(t: &TensorFile) -> Result<Vec<TestItem>> {
    let mut items: Vec<TestItem> = Vec::new();
    let mut start = 0;
    while start < t.len() {
        let m = t.meta(start);
        let mut end = start + 1;
        while end < t.len() && t.meta(end).token_id == m.token_id {
            if t.meta(end) != m {
                return Err(Error::malformed("test set", format!("item {} changes labels mid-item", m.token_id)));
            }
            end += 1;
        }
        items.push(TestItem {
            id: u64::from(m.token_id),
            label: m.category,
            speaker: m.speaker,
            n_frames: end - start,
            frames: t.rows_f64(start, end - start)?,
        });
        start = end;
    }
    Ok(items)
}

pub fn save_test_sets(paths: &Paths, sets: &TestSets, phone_dim: usize, visual_dim: usize) -> Result<()> {
    for (name, items, dim) in [
        ("lextest", &sets.lextest, phone_dim),
        ("semtest_words", &sets.semtest_words, phone_dim),
        ("semtest_objects", &sets.semtest_objects, visual_dim),
        ("abx", &sets.abx, phone_dim),
    ] {
        write_file(&paths.test_set(name), items_to_tensor(items, dim)?.to_bytes()?)?;
    }
    Ok(())
}

pub fn load_test_sets(paths: &Paths) -> Result<TestSets> {
    let load = |name: &str| tensor_to_items(&TensorFile::load(&paths.test_set(name))?);
    Ok(TestSets {
        lextest: load("lextest")?,
        semtest_words: load("semtest_words")?,
        semtest_objects: load("semtest_objects")?,
        abx: load("abx")?,
    })
}

/// Inventory, checked against the generated copy when one exists.
pub fn saved_inventory(paths: &Paths) -> Result<CategoryInventory> {
    CategoryInventory::load(paths.inventory())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::naming_stats::CategoryInventory;
    use crate::world::{generate_world, make_test_sets, TestSetConfig, WorldConfig};

    fn world() -> World {
        let inv = CategoryInventory::synthetic_zipf(6, 1.0, 3.0, 1).unwrap();
        generate_world(&WorldConfig { n_categories: 6, n_speakers: 3, ..WorldConfig::default() }, &inv).unwrap()
    }

    #[test]
    fn pool_is_deterministic_per_pair() {
        let w = world();
        let a = generate_pool(&w, 20, 0.5, 9);
        let b = generate_pool(&w, 10, 0.5, 9);
        assert_eq!(&a[..10], &b[..]);
        assert!(a.iter().all(|p| !p.scene.objects.is_empty()));
    }

    #[test]
    fn pool_records_round_trip_frames() {
        let w = world();
        let pool = generate_pool(&w, 5, 0.5, 2);
        let (recs, audio, visual) = pool_records(&pool, 12, 16).unwrap();
        let ex = load_examples(&recs, &audio, &visual, true).unwrap();
        for (p, e) in pool.iter().zip(&ex) {
            assert_eq!(e.n_frames, p.utterance.n_frames());
            assert_eq!(e.n_objects, p.scene.objects.len());
            let flat = p.utterance.flat_frames();
            assert!(flat.iter().zip(&e.frames).all(|(a, b)| (a - b).abs() < 1e-6 * a.abs().max(1.0)));
        }
    }

    #[test]
    fn test_items_round_trip() {
        let w = world();
        let sets = make_test_sets(&w, &TestSetConfig { tokens_per_type: 3, abx_tokens_per_cell: 1 }, 100, 0).unwrap();
        let t = items_to_tensor(&sets.lextest, 12).unwrap();
        let back = tensor_to_items(&t).unwrap();
        assert_eq!(back.len(), sets.lextest.len());
        for (a, b) in back.iter().zip(&sets.lextest) {
            assert_eq!((a.id, a.label, a.speaker, a.n_frames), (b.id, b.label, b.speaker, b.n_frames));
        }
    }

    #[test]
    fn lock_is_exclusive() {
        let dir = tempfile::tempdir().unwrap();
        let lock = DirLock::acquire(dir.path()).unwrap();
        assert!(matches!(DirLock::acquire(dir.path()), Err(Error::Locked(_))));
        drop(lock);
        assert!(DirLock::acquire(dir.path()).is_ok());
    }
}
