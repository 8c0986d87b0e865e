//! Normal-angle dictionary for pruning faces before distance evaluation.
//!
//! Every face normal is reduced to its angle `alpha` against a reference
//! direction and the faces are sorted by it. A measurement normal's own
//! angle is bracketed by binary search, and only faces whose `alpha` falls
//! within `delta_alpha` of the bracket are compared. Because
//! `|alpha_y - alpha_i| <= angle(y_nor, n_i)`, any face whose normal is
//! within `delta_alpha` of the measured normal always survives.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{angle_between, unit, Mesh, UnitVec3};

/// One dictionary entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub alpha: f64,
    pub face: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AngleIndex {
    reference: UnitVec3,
    entries: Vec<IndexEntry>,
    fingerprint: [u8; 32],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyConfig {
    pub n_bins: usize,
    pub n_candidate_refs: usize,
    pub seed: u64,
}

impl Default for EntropyConfig {
    fn default() -> Self {
        Self {
            n_bins: 18,
            n_candidate_refs: 100,
            seed: 0,
        }
    }
}

impl EntropyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_bins < 2 || self.n_candidate_refs == 0 {
            return Err(Error::InvalidParameter(format!(
                "entropy config needs n_bins >= 2 and n_candidate_refs >= 1, got {self:?}"
            )));
        }
        Ok(())
    }
}

fn face_alphas<'a>(mesh: &'a Mesh, reference: &'a UnitVec3) -> impl Iterator<Item = f64> + 'a {
    let reference = *reference;
    mesh.faces().iter().map(move |f| angle_between(&reference, &f.normal))
}

/// Bin of `alpha` among `n_bins` equal segments of `[0, pi]`; the last bin
/// is closed on the right.
fn bin_of(alpha: f64, n_bins: usize) -> usize {
    let b = (alpha / PI * n_bins as f64).floor();
    (b.max(0.0) as usize).min(n_bins - 1)
}

pub fn histogram(alphas: impl IntoIterator<Item = f64>, n_bins: usize) -> Vec<usize> {
    let mut counts = vec![0; n_bins.max(1)];
    for a in alphas {
        counts[bin_of(a, n_bins.max(1))] += 1;
    }
    counts
}

/// Natural-log Shannon entropy of the binned angle distribution.
pub fn shannon_entropy(alphas: &[f64], n_bins: usize) -> f64 {
    if alphas.is_empty() {
        return 0.0;
    }
    let total = alphas.len() as f64;
    histogram(alphas.iter().copied(), n_bins)
        .into_iter()
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / total;
            -p * p.ln()
        })
        .sum()
}

/// Samples candidate references uniformly on the sphere and keeps the one
/// whose angle distribution has the highest entropy (first wins on ties).
pub fn select_reference_vector(mesh: &Mesh, config: &EntropyConfig) -> Result<UnitVec3> {
    config.validate()?;
    let mut rng = crate::substream(config.seed, 0);
    let mut best: Option<(f64, UnitVec3)> = None;
    let mut alphas = Vec::with_capacity(mesh.face_count());
    for _ in 0..config.n_candidate_refs {
        let [x, y, z]: [f64; 3] = UnitSphere.sample(&mut rng);
        let candidate = unit(x, y, z)?;
        alphas.clear();
        alphas.extend(face_alphas(mesh, &candidate));
        let s = shannon_entropy(&alphas, config.n_bins);
        if best.is_none_or(|(b, _)| s > b) {
            best = Some((s, candidate));
        }
    }
    Ok(best.expect("n_candidate_refs >= 1").1)
}

/// Wire form of the sidecar file.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IndexFile {
    reference: [f64; 3],
    entries: Vec<(f64, usize)>,
    fingerprint: String,
}

impl AngleIndex {
    /// Sorts faces by the angle between their normal and `reference`
    /// (stable, face id breaks ties).
    pub fn build(mesh: &Mesh, reference: UnitVec3) -> Self {
        let mut entries: Vec<IndexEntry> = face_alphas(mesh, &reference)
            .enumerate()
            .map(|(face, alpha)| IndexEntry { alpha, face })
            .collect();
        entries.sort_by(|a, b| a.alpha.total_cmp(&b.alpha).then(a.face.cmp(&b.face)));
        Self {
            reference,
            entries,
            fingerprint: *mesh.fingerprint(),
        }
    }

    /// Builds with an entropy-selected reference.
    pub fn build_auto(mesh: &Mesh, config: &EntropyConfig) -> Result<Self> {
        Ok(Self::build(mesh, select_reference_vector(mesh, config)?))
    }

    pub fn reference(&self) -> &UnitVec3 {
        &self.reference
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn fingerprint(&self) -> &[u8; 32] {
        &self.fingerprint
    }

    pub fn check_mesh(&self, mesh: &Mesh) -> Result<()> {
        if &self.fingerprint == mesh.fingerprint() && self.entries.len() == mesh.face_count() {
            Ok(())
        } else {
            Err(Error::IndexMismatch)
        }
    }

    pub fn alphas(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|e| e.alpha)
    }

    pub fn entropy(&self, n_bins: usize) -> f64 {
        let alphas: Vec<f64> = self.alphas().collect();
        shannon_entropy(&alphas, n_bins)
    }

    pub fn histogram(&self, n_bins: usize) -> Vec<usize> {
        histogram(self.alphas(), n_bins)
    }

    /// Contiguous run of entries passing the window
    /// `alpha_L - delta < alpha_i < alpha_H + delta`, always including the
    /// bracketing entries themselves. `y_nor` must be in the object frame.
    #[inline]
    pub fn candidate_entries(&self, y_nor: &UnitVec3, delta_alpha: f64) -> &[IndexEntry] {
        let e = &self.entries;
        let alpha_y = angle_between(&self.reference, y_nor);

        // first entry >= alpha_y; clamp to the ends of the dictionary
        let hi_pos = e.partition_point(|x| x.alpha < alpha_y);
        let alpha_high = e[hi_pos.min(e.len() - 1)].alpha;
        let alpha_low = if hi_pos < e.len() && e[hi_pos].alpha == alpha_y {
            alpha_y
        } else if hi_pos == 0 {
            e[0].alpha
        } else {
            e[hi_pos - 1].alpha
        };

        let lo_bound = alpha_low - delta_alpha;
        let hi_bound = alpha_high + delta_alpha;
        // a bound that reaches past 0 or pi keeps the closed end of the range
        let start = if lo_bound <= 0.0 {
            0
        } else {
            e.partition_point(|x| !(x.alpha > lo_bound || x.alpha >= alpha_low))
        };
        let end = if hi_bound >= PI {
            e.len()
        } else {
            e.partition_point(|x| x.alpha < hi_bound || x.alpha <= alpha_high)
        };
        &e[start..end]
    }

    /// Candidate face ids, ascending.
    pub fn candidate_faces(&self, y_nor: &UnitVec3, delta_alpha: f64) -> Result<Vec<usize>> {
        if !(delta_alpha >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "delta_alpha must be >= 0, got {delta_alpha}"
            )));
        }
        let mut ids: Vec<usize> = self
            .candidate_entries(y_nor, delta_alpha)
            .iter()
            .map(|e| e.face)
            .collect();
        ids.sort_unstable();
        Ok(ids)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = IndexFile {
            reference: [self.reference.x, self.reference.y, self.reference.z],
            entries: self.entries.iter().map(|e| (e.alpha, e.face)).collect(),
            fingerprint: crate::geometry::mesh_hex(&self.fingerprint),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: IndexFile = serde_json::from_str(text)?;
        let [x, y, z] = file.reference;
        let reference = unit(x, y, z)?;
        let fingerprint = parse_hex32(&file.fingerprint)
            .ok_or_else(|| Error::InvalidParameter("fingerprint must be 64 hex digits".into()))?;
        let entries: Vec<IndexEntry> = file
            .entries
            .into_iter()
            .map(|(alpha, face)| IndexEntry { alpha, face })
            .collect();
        let sorted = entries
            .windows(2)
            .all(|w| w[0].alpha < w[1].alpha || (w[0].alpha == w[1].alpha && w[0].face < w[1].face));
        if entries.is_empty() || !sorted || entries.iter().any(|e| !(0.0..=PI).contains(&e.alpha)) {
            return Err(Error::InvalidParameter(
                "index entries must be sorted angles in [0, pi]".into(),
            ));
        }
        Ok(Self {
            reference,
            entries,
            fingerprint,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

fn parse_hex32(s: &str) -> Option<[u8; 32]> {
    if s.len() != 64 {
        return None;
    }
    let mut out = [0u8; 32];
    for (i, chunk) in s.as_bytes().chunks(2).enumerate() {
        out[i] = u8::from_str_radix(std::str::from_utf8(chunk).ok()?, 16).ok()?;
    }
    Some(out)
}

/// Fraction of the dictionary that survives the window for random normals
/// drawn uniformly on the sphere. Useful for index diagnostics.
pub fn mean_candidate_fraction<R: Rng + ?Sized>(
    index: &AngleIndex,
    delta_alpha: f64,
    samples: usize,
    rng: &mut R,
) -> f64 {
    let mut total = 0usize;
    for _ in 0..samples {
        let [x, y, z]: [f64; 3] = UnitSphere.sample(rng);
        let n = UnitVec3::new_normalize(nalgebra::Vector3::new(x, y, z));
        total += index.candidate_entries(&n, delta_alpha).len();
    }
    total as f64 / (samples.max(1) * index.len()) as f64
}
