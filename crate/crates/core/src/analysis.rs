//! Similarity, projection and label statistics over learned latents.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::model::{Model, Trajectories};
use crate::numeric::Scalar;

/// Latent trajectories of every author, taken from one model.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySet {
    /// `[A][d_static]`; rows are empty when the model has no `h_a`.
    pub h_static: Vec<Vec<f64>>,
    /// `[A][T][d]`, timestep 1 first.
    pub h_dynamic: Vec<Vec<Vec<f64>>>,
    pub author_names: Vec<String>,
    pub num_timesteps: usize,
}

impl TrajectorySet {
    /// Checks that every vector of each kind has one dimension.
    pub fn new(traj: Trajectories, author_names: Vec<String>) -> Result<Self> {
        let Trajectories { h_static, h_dynamic } = traj;
        if author_names.len() != h_dynamic.len() || h_static.len() != h_dynamic.len() {
            return Err(Error::shape(
                "trajectory set",
                format!("{} names, {} static rows, {} trajectories", author_names.len(), h_static.len(), h_dynamic.len()),
            ));
        }
        let t = h_dynamic.first().map_or(0, Vec::len);
        let d = h_dynamic.first().and_then(|p| p.first()).map_or(0, Vec::len);
        if h_dynamic.iter().any(|p| p.len() != t || p.iter().any(|v| v.len() != d)) {
            return Err(Error::shape("trajectory set", "ragged dynamic vectors"));
        }
        let ds = h_static.first().map_or(0, Vec::len);
        if h_static.iter().any(|v| v.len() != ds) {
            return Err(Error::shape("trajectory set", "ragged static vectors"));
        }
        Ok(TrajectorySet {
            h_static,
            h_dynamic,
            author_names,
            num_timesteps: t,
        })
    }

    pub fn from_model<T: Scalar>(model: &Model<T>, author_names: Vec<String>) -> Result<Self> {
        Self::new(model.trajectories()?, author_names)
    }

    pub fn num_authors(&self) -> usize {
        self.h_dynamic.len()
    }

    fn check_author(&self, author: usize) -> Result<()> {
        if author >= self.num_authors() {
            return Err(Error::UnknownAuthor(author));
        }
        Ok(())
    }

    /// Raw vectors as `author TAB t TAB x_1 TAB … TAB x_d` lines.
    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        for (a, path) in self.h_dynamic.iter().enumerate() {
            for (t, v) in path.iter().enumerate() {
                write!(s, "{}\t{}", self.author_names[a], t + 1).unwrap();
                for x in v {
                    write!(s, "\t{x}").unwrap();
                }
                s.push('\n');
            }
        }
        s
    }
}

/// Cosine similarity; 0 when either vector is zero, exactly 1 for equal
/// nonzero vectors.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    if a == b {
        return 1.0;
    }
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

/// Mean cosine over all unordered author pairs, per timestep.
pub fn avg_cosine_series(traj: &TrajectorySet) -> Result<Vec<(usize, f64)>> {
    let n = traj.num_authors();
    if n < 2 {
        return Err(Error::invalid(format!("average similarity needs 2 authors, have {n}")));
    }
    let pairs = (n * (n - 1) / 2) as f64;
    Ok((0..traj.num_timesteps)
        .map(|t| {
            let mut sum = 0.0;
            for a in 0..n {
                for b in a + 1..n {
                    sum += cosine(&traj.h_dynamic[a][t], &traj.h_dynamic[b][t]);
                }
            }
            (t + 1, sum / pairs)
        })
        .collect())
}

/// `cos(h_{a,1}, h_{a,t})` for every timestep.
pub fn self_similarity(traj: &TrajectorySet, author: usize) -> Result<Vec<(usize, f64)>> {
    traj.check_author(author)?;
    let path = &traj.h_dynamic[author];
    Ok(path.iter().enumerate().map(|(t, v)| (t + 1, cosine(&path[0], v))).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Lowest first-to-last cosine first.
    Most,
    Least,
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "most" => Ok(Direction::Most),
            "least" => Ok(Direction::Least),
            _ => Err(Error::invalid(format!("unknown direction {s:?} (expected most or least)"))),
        }
    }
}

/// `k` authors ranked by `cos(h_{a,1}, h_{a,T})`, among `restrict_to`
/// (all authors when `None`). Ties keep the lower author id first.
pub fn top_movers(
    traj: &TrajectorySet,
    k: usize,
    direction: Direction,
    restrict_to: Option<&[usize]>,
) -> Result<Vec<(usize, f64)>> {
    let all: Vec<usize> = (0..traj.num_authors()).collect();
    let pool = restrict_to.unwrap_or(&all);
    if pool.is_empty() {
        return Err(Error::Empty { what: "author restriction" });
    }
    if k > pool.len() {
        return Err(Error::invalid(format!("k = {k} exceeds the {} candidate authors", pool.len())));
    }
    if traj.num_timesteps == 0 {
        return Err(Error::Empty { what: "trajectory" });
    }
    let mut ranked = Vec::with_capacity(pool.len());
    for &a in pool {
        traj.check_author(a)?;
        let path = &traj.h_dynamic[a];
        ranked.push((a, cosine(&path[0], &path[path.len() - 1])));
    }
    ranked.sort_by(|x, y| {
        let by = match direction {
            Direction::Most => x.1.total_cmp(&y.1),
            Direction::Least => y.1.total_cmp(&x.1),
        };
        by.then(x.0.cmp(&y.0))
    });
    ranked.truncate(k);
    Ok(ranked)
}

/// `rank TAB author TAB cosine` lines, rank from 1.
pub fn movers_tsv(traj: &TrajectorySet, movers: &[(usize, f64)]) -> String {
    movers
        .iter()
        .enumerate()
        .map(|(r, &(a, c))| format!("{}\t{}\t{c}\n", r + 1, traj.author_names[a]))
        .collect()
}

/// Projection onto the two leading principal axes.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca2d {
    pub points: Vec<[f64; 2]>,
    /// Share of total variance along each axis.
    pub explained: [f64; 2],
    /// Unit principal axes; the largest-magnitude coordinate of each is positive.
    pub axes: [Vec<f64>; 2],
}

pub fn pca_2d(vectors: &[Vec<f64>]) -> Result<Pca2d> {
    let n = vectors.len();
    if n < 2 {
        return Err(Error::invalid(format!("PCA needs 2 vectors, have {n}")));
    }
    let d = vectors[0].len();
    if d < 2 {
        return Err(Error::invalid(format!("PCA needs dimension 2, have {d}")));
    }
    if vectors.iter().any(|v| v.len() != d) {
        return Err(Error::shape("pca_2d", "vectors differ in length"));
    }
    let mean: Vec<f64> = (0..d).map(|j| vectors.iter().map(|v| v[j]).sum::<f64>() / n as f64).collect();
    let x = DMatrix::from_fn(n, d, |i, j| vectors[i][j] - mean[j]);
    let cov = (x.transpose() * &x) / (n - 1) as f64;
    let total = cov.trace();
    let scale = vectors.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    if !(total > 1e-24 * scale * scale * d as f64) {
        return Err(Error::invalid("PCA input has rank 0 (all vectors identical)"));
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let axis = |k: usize| -> Vec<f64> {
        let col = eig.eigenvectors.column(order[k]);
        let big = (0..d).fold(0, |m, j| if col[j].abs() > col[m].abs() { j } else { m });
        let sign = if col[big] < 0.0 { -1.0 } else { 1.0 };
        col.iter().map(|c| c * sign).collect()
    };
    let axes = [axis(0), axis(1)];
    let explained = [0, 1].map(|k| (eig.eigenvalues[order[k]].max(0.0) / total).min(1.0));
    let points = (0..n)
        .map(|i| {
            let row = x.row(i);
            [0, 1].map(|k| row.iter().zip(&axes[k]).map(|(a, b)| a * b).sum())
        })
        .collect();
    Ok(Pca2d { points, explained, axes })
}

/// PCA over every `h_{a,t}` of the set; output rows are
/// `author TAB t TAB x TAB y`.
pub fn trajectory_projection_tsv(traj: &TrajectorySet) -> Result<(Pca2d, String)> {
    let flat: Vec<Vec<f64>> = traj.h_dynamic.iter().flatten().cloned().collect();
    let pca = pca_2d(&flat)?;
    let mut s = String::new();
    let tt = traj.num_timesteps;
    for (i, p) in pca.points.iter().enumerate() {
        writeln!(s, "{}\t{}\t{}\t{}", traj.author_names[i / tt], i % tt + 1, p[0], p[1]).unwrap();
    }
    Ok((pca, s))
}

/// Shannon entropy (nats) of label occurrences per timestep; timesteps
/// without labels are left out.
pub fn label_entropy_series(corpus: &Corpus) -> Result<Vec<(usize, f64)>> {
    let mut counts: BTreeMap<usize, BTreeMap<&str, usize>> = BTreeMap::new();
    for d in &corpus.documents {
        for l in &d.labels {
            *counts.entry(d.time).or_default().entry(l.as_str()).or_default() += 1;
        }
    }
    if counts.is_empty() {
        return Err(Error::Empty { what: "label set" });
    }
    Ok(counts
        .into_iter()
        .map(|(t, c)| {
            let total: usize = c.values().sum();
            let h = c
                .values()
                .map(|&k| {
                    let p = k as f64 / total as f64;
                    -p * p.ln()
                })
                .sum::<f64>();
            // A single label gives −0.
            (t, h + 0.0)
        })
        .collect())
}

/// Most frequent label among `author`'s documents at `time`; ties go to
/// the lexicographically smallest label.
pub fn dominant_label(corpus: &Corpus, author: usize, time: usize) -> Option<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for d in corpus.documents.iter().filter(|d| d.author == author && d.time == time) {
        for l in &d.labels {
            *counts.entry(l.as_str()).or_default() += 1;
        }
    }
    // Ascending keys: a strictly greater count is needed to replace.
    counts
        .into_iter()
        .fold(None, |best: Option<(&str, usize)>, (l, c)| match best {
            Some((_, bc)) if bc >= c => best,
            _ => Some((l, c)),
        })
        .map(|(l, _)| l.to_string())
}

/// `t TAB value` lines.
pub fn series_tsv(series: &[(usize, f64)]) -> String {
    series.iter().map(|(t, v)| format!("{t}\t{v}\n")).collect()
}

#[cfg(test)]
mod tests;
