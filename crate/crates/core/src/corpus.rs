//! Corpus generation by similarity-guided hypercube search.
//!
//! Every unordered pair of expert presets spans a hypercube in the
//! normalized parameter space. A cube is probed axis by axis: the two
//! vertices that a midpoint split along that axis would separate are
//! rendered and compared. If the most dissimilar axis is still below the
//! similarity threshold the cube is split there, the probed vertices join
//! the corpus and both halves are searched independently. Otherwise the
//! cube is considered homogeneous and contributes its centroid.
//!
//! Halves never share state, so they are searched in parallel; the result
//! is merged as a set keyed by content-derived ids and does not depend on
//! the number of workers or on scheduling order.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use dashmap::DashMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifact::{content_hash, read_bytes};
use crate::similarity::{MfccGaussianSimilarity, SimilarityMeasure, SimilarityScore};
use crate::synth::{self, ParameterVector, RenderSettings, SoundSample, PARAM_COUNT};
use crate::{wav, Error, Result};

pub const MANIFEST_FORMAT: &str = "timbre-corpus";
pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.jsonl";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hypercube {
    lo: ParameterVector,
    hi: ParameterVector,
}

impl Hypercube {
    pub fn new(lo: ParameterVector, hi: ParameterVector) -> Result<Self> {
        for i in 0..PARAM_COUNT {
            if lo.values()[i] > hi.values()[i] {
                return Err(Error::Params(format!(
                    "lower bound exceeds upper bound on axis {i}"
                )));
            }
        }
        Ok(Hypercube { lo, hi })
    }

    /// The cube with `a` and `b` as opposite extreme vertices.
    pub fn spanning(a: &ParameterVector, b: &ParameterVector) -> Self {
        let mut lo = [0.0; PARAM_COUNT];
        let mut hi = [0.0; PARAM_COUNT];
        for i in 0..PARAM_COUNT {
            lo[i] = a.values()[i].min(b.values()[i]);
            hi[i] = a.values()[i].max(b.values()[i]);
        }
        Hypercube {
            lo: ParameterVector::new(lo).expect("min of valid values"),
            hi: ParameterVector::new(hi).expect("max of valid values"),
        }
    }

    pub fn lo(&self) -> &ParameterVector {
        &self.lo
    }

    pub fn hi(&self) -> &ParameterVector {
        &self.hi
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.hi.values()[axis] - self.lo.values()[axis]
    }

    /// Axes with non-zero width.
    pub fn live_axes(&self) -> Vec<usize> {
        (0..PARAM_COUNT).filter(|&i| self.width(i) > 0.0).collect()
    }

    /// Product of all widths; zero as soon as one axis is degenerate.
    pub fn volume(&self) -> f64 {
        (0..PARAM_COUNT).map(|i| self.width(i)).product()
    }

    /// Product of the non-degenerate widths, the volume of the cube inside
    /// the subspace it actually spans. Zero if no axis is live.
    pub fn live_volume(&self) -> f64 {
        let live = self.live_axes();
        if live.is_empty() {
            return 0.0;
        }
        live.iter().map(|&i| self.width(i)).product()
    }

    pub fn contains(&self, p: &ParameterVector) -> bool {
        (0..PARAM_COUNT)
            .all(|i| self.lo.values()[i] <= p.values()[i] && p.values()[i] <= self.hi.values()[i])
    }

    pub fn centroid(&self) -> ParameterVector {
        let mut c = [0.0; PARAM_COUNT];
        for (i, v) in c.iter_mut().enumerate() {
            *v = 0.5 * (self.lo.values()[i] + self.hi.values()[i]);
        }
        ParameterVector::new(c).expect("midpoint of valid values")
    }

    /// Halve the cube at the midpoint of `axis`.
    pub fn split(&self, axis: usize) -> Result<(Hypercube, Hypercube)> {
        if axis >= PARAM_COUNT {
            return Err(Error::Index {
                index: axis,
                len: PARAM_COUNT,
            });
        }
        if self.width(axis) <= 0.0 {
            return Err(Error::DegenerateAxis(axis));
        }
        let mid = 0.5 * (self.lo.values()[axis] + self.hi.values()[axis]);
        let left = Hypercube {
            lo: self.lo,
            hi: self.hi.with(axis, mid)?,
        };
        let right = Hypercube {
            lo: self.lo.with(axis, mid)?,
            hi: self.hi,
        };
        Ok((left, right))
    }

    /// The two corners separated by a split along `axis`: all coordinates at
    /// the lower bound, with `axis` at its lower and upper bound.
    pub fn side_vertices(&self, axis: usize) -> Result<(ParameterVector, ParameterVector)> {
        if axis >= PARAM_COUNT {
            return Err(Error::Index {
                index: axis,
                len: PARAM_COUNT,
            });
        }
        if self.width(axis) <= 0.0 {
            return Err(Error::DegenerateAxis(axis));
        }
        Ok((self.lo, self.lo.with(axis, self.hi.values()[axis])?))
    }
}

/// One cube per unordered preset pair, in `(i, j)` lexicographic order.
pub fn presets_to_hypercubes(presets: &[ParameterVector]) -> Result<Vec<Hypercube>> {
    Ok(preset_pairs(presets)?.into_iter().map(|(_, c)| c).collect())
}

fn preset_pairs(presets: &[ParameterVector]) -> Result<Vec<((usize, usize), Hypercube)>> {
    if presets.len() < 2 {
        return Err(Error::NotEnough {
            what: "presets",
            needed: 2,
            got: presets.len(),
        });
    }
    let mut out = Vec::new();
    for i in 0..presets.len() {
        for j in i + 1..presets.len() {
            out.push(((i, j), Hypercube::spanning(&presets[i], &presets[j])));
        }
    }
    Ok(out)
}

/// Parse a presets file: one preset per line, 16 whitespace separated
/// decimals in `[0, 1]`; `#` starts a comment.
pub fn parse_presets(text: &str) -> Result<Vec<ParameterVector>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let values: Vec<f64> = body
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::format("presets", format!("line {}: {e}", lineno + 1)))?;
        let p = ParameterVector::from_slice(&values)
            .map_err(|e| Error::format("presets", format!("line {}: {e}", lineno + 1)))?;
        out.push(p);
    }
    Ok(out)
}

/// Anything that turns parameters into sound.
pub trait Renderer: Send + Sync {
    fn render(&self, params: &ParameterVector, octave: i32) -> Result<SoundSample>;
}

/// The VPS synthesizer at a fixed duration, rate and noise seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthRenderer {
    pub duration: f64,
    pub rate: u32,
    pub seed: u64,
}

impl Default for SynthRenderer {
    fn default() -> Self {
        SynthRenderer {
            duration: synth::DEFAULT_DURATION,
            rate: synth::DEFAULT_RATE,
            seed: 0,
        }
    }
}

impl Renderer for SynthRenderer {
    fn render(&self, params: &ParameterVector, octave: i32) -> Result<SoundSample> {
        synth::render_with(
            params,
            &RenderSettings {
                octave,
                transpose_semitones: 0,
                duration: self.duration,
                rate: self.rate,
                seed: self.seed,
            },
        )
    }
}

/// Compare the two vertices on either side of a split along `axis`.
/// Vertices are snapped to the parameter grid before rendering.
pub fn side_similarity<R, M>(
    cube: &Hypercube,
    axis: usize,
    octave: i32,
    renderer: &R,
    measure: &M,
) -> Result<SimilarityScore>
where
    R: Renderer + ?Sized,
    M: SimilarityMeasure,
{
    let (a, b) = cube.side_vertices(axis)?;
    let (a, b) = (a.quantize(), b.quantize());
    if a == b {
        return Ok(SimilarityScore::new(1.0));
    }
    let ma = measure.model(&renderer.render(&a, octave)?)?;
    let mb = measure.model(&renderer.render(&b, octave)?)?;
    Ok(measure.compare(&ma, &mb))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OctavePolicy {
    pub low: i32,
    pub high: i32,
}

impl OctavePolicy {
    /// Octave assigned to the `index`-th preset pair: cycles `low..=high`.
    pub fn octave_for(&self, index: usize) -> i32 {
        let span = (self.high - self.low + 1).max(1) as usize;
        self.low + (index % span) as i32
    }
}

impl Default for OctavePolicy {
    fn default() -> Self {
        OctavePolicy { low: -2, high: 2 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExploreConfig {
    pub similarity_threshold: f64,
    pub min_volume: f64,
    pub max_depth: u32,
    pub duration: f64,
    pub sample_rate: u32,
    pub seed: u64,
    pub octaves: OctavePolicy,
    pub workers: usize,
}

impl Default for ExploreConfig {
    fn default() -> Self {
        ExploreConfig {
            similarity_threshold: 0.85,
            min_volume: 1e-12,
            max_depth: 12,
            duration: synth::DEFAULT_DURATION,
            sample_rate: synth::DEFAULT_RATE,
            seed: 0,
            octaves: OctavePolicy::default(),
            workers: 1,
        }
    }
}

impl ExploreConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.similarity_threshold) {
            return Err(Error::Domain {
                what: "similarity threshold",
                value: self.similarity_threshold,
            });
        }
        if !(self.min_volume > 0.0) {
            return Err(Error::Domain {
                what: "min volume",
                value: self.min_volume,
            });
        }
        if self.max_depth < 1 {
            return Err(Error::Domain {
                what: "max depth",
                value: 0.0,
            });
        }
        if !(synth::MIN_OCTAVE..=synth::MAX_OCTAVE).contains(&self.octaves.low)
            || !(synth::MIN_OCTAVE..=synth::MAX_OCTAVE).contains(&self.octaves.high)
            || self.octaves.low > self.octaves.high
        {
            return Err(Error::Domain {
                what: "octave range",
                value: self.octaves.low as f64,
            });
        }
        Ok(())
    }

    pub fn renderer(&self) -> SynthRenderer {
        SynthRenderer {
            duration: self.duration,
            rate: self.sample_rate,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Provenance {
    pub preset_pair: (usize, usize),
    pub depth: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub id: String,
    pub params: ParameterVector,
    pub octave: i32,
    pub audio_path: Option<PathBuf>,
    pub provenance: Provenance,
}

/// Content-derived id: hash of the quantized levels and the octave.
pub fn entry_id(params: &ParameterVector, octave: i32) -> String {
    let mut bytes = Vec::with_capacity(PARAM_COUNT * 4 + 4);
    for l in params.quantize().levels() {
        bytes.extend_from_slice(&l.to_le_bytes());
    }
    bytes.extend_from_slice(&octave.to_le_bytes());
    content_hash(&bytes)[..16].to_string()
}

/// A cube the search stopped at, with the reason it stopped.
#[derive(Debug, Clone, PartialEq)]
pub struct TerminalCube {
    pub root: usize,
    /// Split decisions from the root, `0` for the lower half.
    pub path: String,
    pub cube: Hypercube,
    pub depth: u32,
    /// Lowest side similarity over live axes (1 if none is live).
    pub min_similarity: f64,
}

impl TerminalCube {
    pub fn satisfies_termination(&self, cfg: &ExploreConfig) -> bool {
        self.min_similarity >= cfg.similarity_threshold
            || self.cube.live_volume() <= cfg.min_volume
            || self.depth >= cfg.max_depth
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExploreOutput {
    /// Entries keyed by id.
    pub entries: BTreeMap<String, CorpusEntry>,
    pub terminals: Vec<TerminalCube>,
    /// Branches abandoned because rendering or analysis failed.
    pub failures: Vec<String>,
}

#[derive(Default)]
struct Partial {
    entries: Vec<CorpusEntry>,
    terminals: Vec<TerminalCube>,
    failures: Vec<String>,
}

impl Partial {
    fn merge(mut self, other: Partial) -> Partial {
        self.entries.extend(other.entries);
        self.terminals.extend(other.terminals);
        self.failures.extend(other.failures);
        self
    }
}

type CacheKey = ([u32; PARAM_COUNT], i32);

struct Search<'a, R: ?Sized, M: SimilarityMeasure> {
    cfg: &'a ExploreConfig,
    renderer: &'a R,
    measure: &'a M,
    cache: DashMap<CacheKey, Arc<M::Model>>,
}

impl<R, M> Search<'_, R, M>
where
    R: Renderer + ?Sized,
    M: SimilarityMeasure,
{
    fn model(&self, p: &ParameterVector, octave: i32) -> Result<Arc<M::Model>> {
        let key = (p.levels(), octave);
        if let Some(m) = self.cache.get(&key) {
            return Ok(Arc::clone(&m));
        }
        let model = Arc::new(self.measure.model(&self.renderer.render(p, octave)?)?);
        Ok(Arc::clone(&self.cache.entry(key).or_insert(model)))
    }

    fn side(&self, cube: &Hypercube, axis: usize, octave: i32) -> Result<f64> {
        let (a, b) = cube.side_vertices(axis)?;
        let (a, b) = (a.quantize(), b.quantize());
        if a == b {
            return Ok(1.0);
        }
        let ma = self.model(&a, octave)?;
        let mb = self.model(&b, octave)?;
        Ok(self.measure.compare(&ma, &mb).value())
    }

    fn entry(&self, p: &ParameterVector, octave: i32, prov: Provenance) -> CorpusEntry {
        let params = p.quantize();
        CorpusEntry {
            id: entry_id(&params, octave),
            params,
            octave,
            audio_path: None,
            provenance: prov,
        }
    }

    fn explore(
        &self,
        root: usize,
        pair: (usize, usize),
        octave: i32,
        cube: Hypercube,
        depth: u32,
        path: String,
    ) -> Partial {
        let prov = Provenance {
            preset_pair: pair,
            depth,
        };
        let sims: Result<Vec<(usize, f64)>> = cube
            .live_axes()
            .into_par_iter()
            .map(|axis| Ok((axis, self.side(&cube, axis, octave)?)))
            .collect();
        let sims = match sims {
            Ok(s) => s,
            Err(e) => {
                let msg = format!("pair {pair:?} cube {path:?}: {e}");
                log::warn!("abandoning branch: {msg}");
                return Partial {
                    failures: vec![msg],
                    ..Partial::default()
                };
            }
        };
        // lowest similarity, ties to the lowest axis
        let best = sims
            .iter()
            .copied()
            .fold(None::<(usize, f64)>, |acc, (a, s)| match acc {
                Some((_, bs)) if bs <= s => acc,
                _ => Some((a, s)),
            });
        let min_similarity = best.map_or(1.0, |(_, s)| s);

        if let Some((axis, s)) = best {
            if s < self.cfg.similarity_threshold
                && cube.live_volume() > self.cfg.min_volume
                && depth < self.cfg.max_depth
            {
                let (a, b) = cube.side_vertices(axis).expect("live axis");
                let (left, right) = cube.split(axis).expect("live axis");
                let mut here = Partial::default();
                here.entries.push(self.entry(&a, octave, prov));
                here.entries.push(self.entry(&b, octave, prov));
                let (l, r) = rayon::join(
                    || self.explore(root, pair, octave, left, depth + 1, format!("{path}0")),
                    || self.explore(root, pair, octave, right, depth + 1, format!("{path}1")),
                );
                return here.merge(l).merge(r);
            }
        }
        Partial {
            entries: vec![self.entry(&cube.centroid(), octave, prov)],
            terminals: vec![TerminalCube {
                root,
                path,
                cube,
                depth,
                min_similarity,
            }],
            failures: Vec::new(),
        }
    }
}

/// A search root: a cube, the preset pair that spans it and its octave.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub cube: Hypercube,
    pub preset_pair: (usize, usize),
    pub octave: i32,
}

/// Roots for every preset pair with octaves assigned by `policy`.
pub fn roots_from_presets(presets: &[ParameterVector], policy: &OctavePolicy) -> Result<Vec<Root>> {
    let snapped: Vec<ParameterVector> = presets.iter().map(ParameterVector::quantize).collect();
    Ok(preset_pairs(&snapped)?
        .into_iter()
        .enumerate()
        .map(|(i, (pair, cube))| Root {
            cube,
            preset_pair: pair,
            octave: policy.octave_for(i),
        })
        .collect())
}

/// Roots for bare cubes: pair ids are `(i, i)` and octaves follow `policy`.
pub fn roots_from_cubes(cubes: &[Hypercube], policy: &OctavePolicy) -> Vec<Root> {
    cubes
        .iter()
        .enumerate()
        .map(|(i, c)| Root {
            cube: *c,
            preset_pair: (i, i),
            octave: policy.octave_for(i),
        })
        .collect()
}

/// Run the recursive search from every root on `cfg.workers` threads.
pub fn explore<R, M>(
    roots: &[Root],
    cfg: &ExploreConfig,
    renderer: &R,
    measure: &M,
) -> Result<ExploreOutput>
where
    R: Renderer + ?Sized,
    M: SimilarityMeasure,
{
    cfg.validate()?;
    let search = Search {
        cfg,
        renderer,
        measure,
        cache: DashMap::new(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| Error::format("thread pool", e.to_string()))?;
    let parts: Vec<Partial> = pool.install(|| {
        roots
            .par_iter()
            .enumerate()
            .map(|(i, r)| search.explore(i, r.preset_pair, r.octave, r.cube, 0, String::new()))
            .collect()
    });

    let mut out = ExploreOutput::default();
    for part in parts {
        for e in part.entries {
            match out.entries.get_mut(&e.id) {
                Some(existing) if existing.provenance <= e.provenance => {}
                Some(existing) => *existing = e,
                None => {
                    out.entries.insert(e.id.clone(), e);
                }
            }
        }
        out.terminals.extend(part.terminals);
        out.failures.extend(part.failures);
    }
    out.terminals
        .sort_by(|a, b| (a.root, &a.path).cmp(&(b.root, &b.path)));
    Ok(out)
}

/// One manifest line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub id: String,
    pub params: ParameterVector,
    pub octave: i32,
    pub wav: String,
    pub preset_pair: [usize; 2],
    pub depth: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub format: String,
    pub version: u32,
    /// Content hash of the presets file.
    pub input_hash: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusManifest {
    pub header: ManifestHeader,
    pub records: Vec<ManifestRecord>,
    /// Directory the `wav` paths are relative to.
    pub dir: PathBuf,
}

impl CorpusManifest {
    pub fn to_jsonl(&self) -> String {
        let mut s = serde_json::to_string(&self.header).expect("serializable");
        s.push('\n');
        for r in &self.records {
            s.push_str(&serde_json::to_string(r).expect("serializable"));
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str, dir: impl Into<PathBuf>) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let head = lines
            .next()
            .ok_or_else(|| Error::format("corpus manifest", "empty file"))?;
        let header: ManifestHeader = serde_json::from_str(head)
            .map_err(|e| Error::format("corpus manifest", format!("header: {e}")))?;
        if header.format != MANIFEST_FORMAT {
            return Err(Error::format(
                "corpus manifest",
                format!("unexpected format {:?}", header.format),
            ));
        }
        if header.version != MANIFEST_VERSION {
            return Err(Error::Version {
                kind: "corpus manifest",
                found: header.version,
                expected: MANIFEST_VERSION,
            });
        }
        let records = lines
            .enumerate()
            .map(|(i, l)| {
                serde_json::from_str(l)
                    .map_err(|e| Error::format("corpus manifest", format!("record {}: {e}", i + 1)))
            })
            .collect::<Result<Vec<ManifestRecord>>>()?;
        if records.len() != header.count {
            return Err(Error::format(
                "corpus manifest",
                format!(
                    "header says {} records, found {}",
                    header.count,
                    records.len()
                ),
            ));
        }
        Ok(CorpusManifest {
            header,
            records,
            dir: dir.into(),
        })
    }

    /// Load `manifest.jsonl` from a corpus directory (or a manifest path).
    pub fn load(path: &Path) -> Result<Self> {
        let file = if path.is_dir() {
            path.join(MANIFEST_FILE)
        } else {
            path.to_path_buf()
        };
        let dir = file.parent().map(Path::to_path_buf).unwrap_or_default();
        let f = std::fs::File::open(&file).map_err(|e| Error::io(&file, e))?;
        let mut text = String::new();
        for line in BufReader::new(f).lines() {
            text.push_str(&line.map_err(|e| Error::io(&file, e))?);
            text.push('\n');
        }
        Self::parse(&text, dir)
    }

    pub fn wav_path(&self, record: &ManifestRecord) -> PathBuf {
        self.dir.join(&record.wav)
    }
}

/// Search the space between the presets in `presets_file`, render every
/// corpus member to `out_dir/<id>.wav` and write `out_dir/manifest.jsonl`.
pub fn build_corpus(
    presets_file: &Path,
    cfg: &ExploreConfig,
    out_dir: &Path,
) -> Result<CorpusManifest> {
    let bytes = read_bytes(presets_file)?;
    let text =
        String::from_utf8(bytes.clone()).map_err(|_| Error::format("presets", "not UTF-8"))?;
    let presets = parse_presets(&text)?;
    let roots = roots_from_presets(&presets, &cfg.octaves)?;
    let renderer = cfg.renderer();
    let found = explore(&roots, cfg, &renderer, &MfccGaussianSimilarity::default())?;

    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| Error::format("thread pool", e.to_string()))?;
    let records: Vec<ManifestRecord> = pool.install(|| {
        found
            .entries
            .values()
            .collect::<Vec<_>>()
            .par_iter()
            .map(|e| {
                let sound = renderer.render(&e.params, e.octave)?;
                let name = format!("{}.wav", e.id);
                wav::write(&out_dir.join(&name), &sound.samples, sound.sample_rate)?;
                Ok(ManifestRecord {
                    id: e.id.clone(),
                    params: e.params,
                    octave: e.octave,
                    wav: name,
                    preset_pair: [e.provenance.preset_pair.0, e.provenance.preset_pair.1],
                    depth: e.provenance.depth,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let manifest = CorpusManifest {
        header: ManifestHeader {
            format: MANIFEST_FORMAT.to_string(),
            version: MANIFEST_VERSION,
            input_hash: content_hash(&bytes),
            count: records.len(),
        },
        records,
        dir: out_dir.to_path_buf(),
    };
    let path = out_dir.join(MANIFEST_FILE);
    let mut f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    f.write_all(manifest.to_jsonl().as_bytes())
        .map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
