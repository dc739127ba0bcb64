//! The timbre surface: projected corpus entries with cluster colours and a
//! KD-tree over their positions, closing the chain from a 2D position back
//! to synthesis parameters.
//!
//! Linear inverse-distance interpolation blends the parameters of nearby
//! points. It does not follow the non-linear GTM mapping, so blended
//! parameters may sound unlike any of their neighbours.

use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::artifact::{read_bytes, write_bytes};
use crate::features::FeatureMatrix;
use crate::gtm::SavedModel;
use crate::kmeans::{kmeans, DEFAULT_MAX_ITER, DEFAULT_SEED};
use crate::spatial::{KdTree, Neighbor};
use crate::synth::{ParameterVector, PARAM_COUNT};
use crate::{Error, Result};

pub const DEFAULT_CLUSTERS: usize = 50;
pub const LOOKUP_K: usize = 1;
pub const INTERPOLATION_K: usize = 8;
pub const COINCIDENCE_EPS: f64 = 1e-9;
pub const FORMAT: &str = "timbre-surface";
pub const VERSION: u32 = 1;
const GOLDEN_ANGLE_DEG: f64 = 137.507_764_050_037_85;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub cluster: usize,
    pub octave: i32,
    pub feature_ref: usize,
    pub params: ParameterVector,
}

impl SurfacePoint {
    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }
}

/// Corpus-side data of one point.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceEntry {
    pub id: String,
    pub params: ParameterVector,
    pub octave: i32,
}

#[derive(Debug, Clone)]
pub struct TimbreSurface {
    /// Sorted by id, so index order is id order.
    points: Vec<SurfacePoint>,
    palette: Vec<String>,
    input_hash: String,
    tree: KdTree,
}

impl PartialEq for TimbreSurface {
    fn eq(&self, other: &Self) -> bool {
        self.points == other.points
            && self.palette == other.palette
            && self.input_hash == other.input_hash
    }
}

/// `n` colours spread by golden-angle hue steps.
pub fn palette(n: usize) -> Vec<String> {
    (0..n)
        .map(|i| {
            let h = (i as f64 * GOLDEN_ANGLE_DEG) % 360.0;
            let (s, l) = (0.65, if i % 2 == 0 { 0.55 } else { 0.42 });
            let c = (1.0 - (2.0 * l - 1.0f64).abs()) * s;
            let hp = h / 60.0;
            let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
            let (r, g, b) = match hp as u32 {
                0 => (c, x, 0.0),
                1 => (x, c, 0.0),
                2 => (0.0, c, x),
                3 => (0.0, x, c),
                4 => (x, 0.0, c),
                _ => (c, 0.0, x),
            };
            let m = l - c / 2.0;
            let byte = |v: f64| ((v + m) * 255.0).round().clamp(0.0, 255.0) as u8;
            format!("#{:02x}{:02x}{:02x}", byte(r), byte(g), byte(b))
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    input_hash: String,
    count: usize,
    clusters: usize,
    palette: Vec<String>,
}

impl TimbreSurface {
    fn from_parts(
        mut points: Vec<SurfacePoint>,
        palette: Vec<String>,
        input_hash: String,
    ) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::NotEnough {
                what: "surface points",
                needed: 1,
                got: 0,
            });
        }
        points.sort_by(|a, b| a.id.cmp(&b.id));
        if points.windows(2).any(|w| w[0].id == w[1].id) {
            return Err(Error::format("surface", "duplicate point id"));
        }
        for p in &points {
            if !p.x.is_finite() || !p.y.is_finite() {
                return Err(Error::format(
                    "surface",
                    format!("non-finite position for {}", p.id),
                ));
            }
            if p.cluster >= palette.len() {
                return Err(Error::Index {
                    index: p.cluster,
                    len: palette.len(),
                });
            }
        }
        let tree = KdTree::new(points.iter().map(|p| p.position()).collect());
        Ok(TimbreSurface {
            points,
            palette,
            input_hash,
            tree,
        })
    }

    /// Clusters `features` (standardized, one row per entry) with k-means and
    /// indexes `projections`.
    pub fn build(
        projections: &[[f64; 2]],
        features: &DMatrix<f64>,
        entries: &[SurfaceEntry],
        clusters: usize,
        input_hash: &str,
    ) -> Result<Self> {
        let n = entries.len();
        if projections.len() != n || features.nrows() != n {
            return Err(Error::Dimension {
                expected: n,
                got: projections.len().min(features.nrows()),
            });
        }
        if clusters > n || clusters == 0 {
            return Err(Error::NotEnough {
                what: "points for the requested cluster count",
                needed: clusters.max(1),
                got: n,
            });
        }
        let km = kmeans(features, clusters, DEFAULT_MAX_ITER, DEFAULT_SEED)?;
        let points = entries
            .iter()
            .enumerate()
            .map(|(i, e)| SurfacePoint {
                id: e.id.clone(),
                x: projections[i][0],
                y: projections[i][1],
                cluster: km.assignment[i],
                octave: e.octave,
                feature_ref: i,
                params: e.params,
            })
            .collect();
        Self::from_parts(points, palette(clusters), input_hash.to_string())
    }

    /// Projects a feature matrix through a trained model and builds the surface.
    pub fn from_artifacts(
        features: &FeatureMatrix,
        model: &SavedModel,
        clusters: usize,
        input_hash: &str,
    ) -> Result<Self> {
        let z = model.standardizer.apply_matrix(&features.rows);
        let projections = model.model.project_all(&z)?;
        let entries = (0..features.rows.nrows())
            .map(|i| {
                Ok(SurfaceEntry {
                    id: features.ids[i].clone(),
                    params: features.params(i)?,
                    octave: features.octaves[i],
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::build(&projections, &z, &entries, clusters, input_hash)
    }

    pub fn points(&self) -> &[SurfacePoint] {
        &self.points
    }

    pub fn palette(&self) -> &[String] {
        &self.palette
    }

    pub fn input_hash(&self) -> &str {
        &self.input_hash
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&SurfacePoint> {
        self.points
            .binary_search_by(|p| p.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.points[i])
    }

    /// Exact k nearest points, closest first, ties to the lower id.
    pub fn nearest(&self, q: [f64; 2], k: usize) -> Result<Vec<(&SurfacePoint, f64)>> {
        Ok(self
            .neighbors(q, k)?
            .into_iter()
            .map(|n| (&self.points[n.index], n.distance()))
            .collect())
    }

    fn neighbors(&self, q: [f64; 2], k: usize) -> Result<Vec<Neighbor>> {
        if !q[0].is_finite() || !q[1].is_finite() {
            return Err(Error::Domain {
                what: "query position",
                value: if q[0].is_finite() { q[1] } else { q[0] },
            });
        }
        if k == 0 || k > self.len() {
            return Err(Error::NotEnough {
                what: "surface points for the query",
                needed: k.max(1),
                got: self.len(),
            });
        }
        Ok(self.tree.nearest(q, k))
    }

    pub fn lookup_params(&self, q: [f64; 2]) -> Result<ParameterVector> {
        Ok(self.nearest(q, LOOKUP_K)?[0].0.params)
    }

    /// Normalized inverse-distance weights of the `k` nearest points. A
    /// query closer than [`COINCIDENCE_EPS`] to a point gets that point alone.
    pub fn interpolation_weights(&self, q: [f64; 2], k: usize) -> Result<Vec<(usize, f64)>> {
        let nb = self.neighbors(q, k)?;
        if nb[0].distance() < COINCIDENCE_EPS {
            return Ok(vec![(nb[0].index, 1.0)]);
        }
        let inv: Vec<f64> = nb
            .iter()
            .map(|n| 1.0 / (n.distance() + COINCIDENCE_EPS))
            .collect();
        let total: f64 = inv.iter().sum();
        Ok(nb
            .iter()
            .zip(inv)
            .map(|(n, w)| (n.index, w / total))
            .collect())
    }

    pub fn interpolate(&self, q: [f64; 2], k: usize) -> Result<ParameterVector> {
        let weights = self.interpolation_weights(q, k)?;
        if weights.len() == 1 {
            return Ok(self.points[weights[0].0].params);
        }
        let mut out = [0.0; PARAM_COUNT];
        for (s, slot) in out.iter_mut().enumerate() {
            let vals = weights
                .iter()
                .map(|&(i, _)| self.points[i].params.values()[s]);
            let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
                (a.min(v), b.max(v))
            });
            let v: f64 = weights
                .iter()
                .map(|&(i, w)| w * self.points[i].params.values()[s])
                .sum();
            *slot = v.clamp(lo, hi);
        }
        ParameterVector::new(out)
    }

    /// One JSON document; the header and each point sit on their own line.
    pub fn to_document(&self) -> String {
        let header = Header {
            format: FORMAT.into(),
            version: VERSION,
            input_hash: self.input_hash.clone(),
            count: self.points.len(),
            clusters: self.palette.len(),
            palette: self.palette.clone(),
        };
        let mut head = serde_json::to_string(&header).expect("serializable");
        head.pop();
        let mut out = head;
        out.push_str(",\n\"points\":[\n");
        for (i, p) in self.points.iter().enumerate() {
            out.push_str(&serde_json::to_string(p).expect("serializable"));
            out.push_str(if i + 1 < self.points.len() {
                ",\n"
            } else {
                "\n"
            });
        }
        out.push_str("]}\n");
        out
    }

    pub fn from_document(doc: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Doc {
            #[serde(flatten)]
            header: Header,
            points: Vec<SurfacePoint>,
        }
        let d: Doc =
            serde_json::from_str(doc).map_err(|e| Error::format("surface", e.to_string()))?;
        if d.header.format != FORMAT {
            return Err(Error::format(
                "surface",
                format!("unexpected format {:?}", d.header.format),
            ));
        }
        if d.header.version != VERSION {
            return Err(Error::Version {
                kind: "surface",
                found: d.header.version,
                expected: VERSION,
            });
        }
        if d.header.count != d.points.len() || d.header.clusters != d.header.palette.len() {
            return Err(Error::format("surface", "counts do not match contents"));
        }
        let ids: BTreeSet<&str> = d.points.iter().map(|p| p.id.as_str()).collect();
        if ids.len() != d.points.len() {
            return Err(Error::format("surface", "duplicate point id"));
        }
        Self::from_parts(d.points, d.header.palette, d.header.input_hash)
    }

    pub fn export(&self, path: &Path) -> Result<()> {
        write_bytes(path, self.to_document().as_bytes())
    }

    pub fn import(path: &Path) -> Result<Self> {
        let bytes = read_bytes(path)?;
        let doc =
            String::from_utf8(bytes).map_err(|_| Error::format("surface", "invalid UTF-8"))?;
        Self::from_document(&doc)
    }
}
