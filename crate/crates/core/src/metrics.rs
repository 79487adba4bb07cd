//! Point-cloud distances on top of an exact k-d tree.
//!
//! Conventions: Chamfer is the sum of the two mean squared nearest-neighbor
//! distances; Hausdorff is un-squared; F-score uses an absolute threshold;
//! normal consistency averages `|n_p · n_NN(p)|` over both directions; EMD
//! reports the squared-cost transport value `W2²`.

use std::fmt;

use crate::geometry::Vec3;
use crate::measures::measure_from_points;
use crate::ot::hungarian::{hungarian_w2, MAX_ASSIGNMENT_SIZE};
use crate::ot::sinkhorn::{sinkhorn, SinkhornOptions};
use crate::{Error, Result};

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

/// Exact nearest-neighbor index over 3D points. Ties go to the smallest
/// point index, matching a first-minimum linear scan.
#[derive(Debug, Clone)]
pub struct NNIndex {
    points: Vec<Vec3>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl NNIndex {
    pub fn new(points: &[Vec3]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let mut idx = Self {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
        };
        idx.build(0, points.len());
        Ok(idx)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let (mut lo, mut hi) = (Vec3::repeat(f64::MAX), Vec3::repeat(f64::MIN));
        for &i in &self.order[start..end] {
            lo = lo.inf(&self.points[i]);
            hi = hi.sup(&self.points[i]);
        }
        let axis = (hi - lo).imax();
        let mid = (start + end) / 2;
        let pts = &self.points;
        self.order[start..end]
            .select_nth_unstable_by(mid - start, |&a, &b| pts[a][axis].total_cmp(&pts[b][axis]));
        let value = self.points[self.order[mid]][axis];
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split { axis, value, left, right };
        id
    }

    /// Index of and squared distance to the nearest point.
    pub fn nearest(&self, q: &Vec3) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(0, q, &mut best);
        best
    }

    fn search(&self, node: usize, q: &Vec3, best: &mut (usize, f64)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d = (self.points[i] - q).norm_squared();
                    if d < best.1 || (d == best.1 && i < best.0) {
                        *best = (i, d);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, best);
                // equality keeps tie candidates on the far side reachable
                if diff * diff <= best.1 {
                    self.search(far, q, best);
                }
            }
        }
    }
}

fn nn_sq(from: &[Vec3], to: &NNIndex) -> Vec<f64> {
    from.iter().map(|p| to.nearest(p).1).collect()
}

fn check(p: &[Vec3], q: &[Vec3]) -> Result<()> {
    if p.is_empty() || q.is_empty() {
        return Err(Error::EmptyCloud);
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn chamfer(p: &[Vec3], q: &[Vec3]) -> Result<f64> {
    check(p, q)?;
    let (ip, iq) = (NNIndex::new(p)?, NNIndex::new(q)?);
    Ok(mean(&nn_sq(p, &iq)) + mean(&nn_sq(q, &ip)))
}

pub fn hausdorff(p: &[Vec3], q: &[Vec3]) -> Result<f64> {
    check(p, q)?;
    let (ip, iq) = (NNIndex::new(p)?, NNIndex::new(q)?);
    let a = nn_sq(p, &iq).into_iter().fold(0.0, f64::max);
    let b = nn_sq(q, &ip).into_iter().fold(0.0, f64::max);
    Ok(a.max(b).sqrt())
}

pub const DEFAULT_FSCORE_TAU: f64 = 0.01;

pub fn fscore(p: &[Vec3], q: &[Vec3], tau: f64) -> Result<f64> {
    check(p, q)?;
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument("fscore threshold must be positive".into()));
    }
    let (ip, iq) = (NNIndex::new(p)?, NNIndex::new(q)?);
    let t2 = tau * tau;
    let frac = |d: Vec<f64>| d.iter().filter(|&&x| x <= t2).count() as f64 / d.len() as f64;
    let precision = frac(nn_sq(p, &iq));
    let recall = frac(nn_sq(q, &ip));
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * precision * recall / (precision + recall))
}

pub fn normal_consistency(p: &[Vec3], np: &[Vec3], q: &[Vec3], nq: &[Vec3]) -> Result<f64> {
    check(p, q)?;
    if np.len() != p.len() || nq.len() != q.len() {
        return Err(Error::MissingNormals);
    }
    let (ip, iq) = (NNIndex::new(p)?, NNIndex::new(q)?);
    let dir = |from: &[Vec3], nf: &[Vec3], to: &NNIndex, nt: &[Vec3]| -> f64 {
        let s: f64 = from
            .iter()
            .zip(nf)
            .map(|(x, n)| n.dot(&nt[to.nearest(x).0]).abs())
            .sum();
        s / from.len() as f64
    };
    Ok(0.5 * (dir(p, np, &iq, nq) + dir(q, nq, &ip, np)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EmdMode {
    Exact,
    Entropic { epsilon: f64 },
}

impl EmdMode {
    pub const DEFAULT_EPSILON: f64 = 1e-3;

    pub fn entropic() -> Self {
        EmdMode::Entropic {
            epsilon: Self::DEFAULT_EPSILON,
        }
    }
}

impl fmt::Display for EmdMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EmdMode::Exact => write!(f, "exact"),
            EmdMode::Entropic { epsilon } => write!(f, "entropic(eps={epsilon:e})"),
        }
    }
}

/// Squared-cost transport between uniform clouds.
pub fn emd(p: &[Vec3], q: &[Vec3], mode: EmdMode) -> Result<f64> {
    check(p, q)?;
    match mode {
        EmdMode::Exact => Ok(hungarian_w2(p, q)?.0),
        EmdMode::Entropic { epsilon } => {
            let opts = SinkhornOptions::new(epsilon).with_tol(1e-6).with_max_iter(50_000);
            Ok(sinkhorn(&measure_from_points(p)?, &measure_from_points(q)?, &opts)?.cost)
        }
    }
}

/// `Exact` when the sizes allow an assignment, else entropic.
pub fn auto_emd_mode(np: usize, nq: usize) -> EmdMode {
    if np == nq && np <= MAX_ASSIGNMENT_SIZE {
        EmdMode::Exact
    } else {
        EmdMode::entropic()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub chamfer: f64,
    pub emd: Option<f64>,
    pub emd_mode: Option<EmdMode>,
    pub hausdorff: f64,
    pub fscore: f64,
    pub fscore_tau: f64,
    pub normal_consistency: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportOptions {
    pub emd: Option<EmdMode>,
    pub fscore_tau: f64,
    /// Fail with `MissingNormals` instead of skipping NC.
    pub require_normals: bool,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            emd: None,
            fscore_tau: DEFAULT_FSCORE_TAU,
            require_normals: false,
        }
    }
}

pub fn metric_report(
    p: &[Vec3],
    np: Option<&[Vec3]>,
    q: &[Vec3],
    nq: Option<&[Vec3]>,
    opts: &ReportOptions,
) -> Result<MetricReport> {
    let normal_consistency = match (np, nq) {
        (Some(a), Some(b)) => Some(normal_consistency(p, a, q, b)?),
        _ if opts.require_normals => return Err(Error::MissingNormals),
        _ => None,
    };
    Ok(MetricReport {
        chamfer: chamfer(p, q)?,
        emd: opts.emd.map(|m| emd(p, q, m)).transpose()?,
        emd_mode: opts.emd,
        hausdorff: hausdorff(p, q)?,
        fscore: fscore(p, q, opts.fscore_tau)?,
        fscore_tau: opts.fscore_tau,
        normal_consistency,
    })
}

impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<28} {:.12e}", "chamfer (sq, mean+mean)", self.chamfer)?;
        if let (Some(e), Some(m)) = (self.emd, self.emd_mode) {
            writeln!(f, "{:<28} {:.12e}", format!("emd [{m}]"), e)?;
        }
        writeln!(f, "{:<28} {:.12e}", "hausdorff", self.hausdorff)?;
        writeln!(f, "{:<28} {:.12}", format!("fscore@{}", self.fscore_tau), self.fscore)?;
        match self.normal_consistency {
            Some(nc) => write!(f, "{:<28} {:.12}", "normal consistency (|cos|)", nc),
            None => write!(f, "{:<28} n/a", "normal consistency (|cos|)"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec3> {
        (0..n).map(|_| Vec3::new(rng.random(), rng.random(), rng.random())).collect()
    }

    fn brute_nn(p: &Vec3, q: &[Vec3]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, x) in q.iter().enumerate() {
            let d = (x - p).norm_squared();
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }

    #[test]
    fn index_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = cloud(&mut rng, 4096);
        let idx = NNIndex::new(&pts).unwrap();
        for _ in 0..1000 {
            let q = Vec3::new(rng.random_range(-0.2..1.2), rng.random(), rng.random());
            let (i, d) = idx.nearest(&q);
            let (j, e) = brute_nn(&q, &pts);
            assert!((d - e).abs() <= 1e-12);
            assert_eq!(i, j);
        }
    }

    #[test]
    fn index_handles_duplicates() {
        let pts = vec![Vec3::new(0.5, 0.5, 0.5); 40];
        let idx = NNIndex::new(&pts).unwrap();
        assert_eq!(idx.nearest(&Vec3::zeros()).0, 0);
    }

    #[test]
    fn chamfer_examples() {
        let a = [Vec3::zeros()];
        let b = [Vec3::new(1.0, 0.0, 0.0)];
        assert_eq!(chamfer(&a, &b).unwrap(), 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = cloud(&mut rng, 50);
        let q = cloud(&mut rng, 80);
        assert_eq!(chamfer(&p, &p).unwrap(), 0.0);
        let brute = p.iter().map(|x| brute_nn(x, &q).1).sum::<f64>() / 50.0
            + q.iter().map(|x| brute_nn(x, &p).1).sum::<f64>() / 80.0;
        assert!((chamfer(&p, &q).unwrap() - brute).abs() <= 1e-12);
        assert!(matches!(chamfer(&p, &[]), Err(Error::EmptyCloud)));
    }

    #[test]
    fn hausdorff_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = cloud(&mut rng, 100);
        let q = cloud(&mut rng, 100);
        assert_eq!(hausdorff(&p, &p).unwrap(), 0.0);
        assert_eq!(hausdorff(&p, &q).unwrap(), hausdorff(&q, &p).unwrap());
    }

    #[test]
    fn fscore_fixture() {
        let p = vec![Vec3::zeros(), Vec3::new(5.0, 0.0, 0.0)];
        let q = vec![Vec3::new(0.001, 0.0, 0.0)];
        assert!((fscore(&p, &q, 0.01).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(fscore(&p, &p, 0.01).unwrap(), 1.0);
        let far: Vec<Vec3> = p.iter().map(|x| x + Vec3::new(0.0, 10.0, 0.0)).collect();
        assert_eq!(fscore(&p, &far, 0.01).unwrap(), 0.0);
    }

    #[test]
    fn normal_consistency_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = cloud(&mut rng, 30);
        let n: Vec<Vec3> = (0..30).map(|_| Vec3::z()).collect();
        let m: Vec<Vec3> = (0..30).map(|_| Vec3::x()).collect();
        assert_eq!(normal_consistency(&p, &n, &p, &n).unwrap(), 1.0);
        assert_eq!(normal_consistency(&p, &n, &p, &m).unwrap(), 0.0);
        assert!(matches!(normal_consistency(&p, &n, &p, &[]), Err(Error::MissingNormals)));
    }

    #[test]
    fn emd_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = cloud(&mut rng, 64);
        assert_eq!(emd(&p, &p, EmdMode::Exact).unwrap(), 0.0);
        let d = 0.3;
        let q: Vec<Vec3> = p.iter().map(|x| x + Vec3::new(d, 0.0, 0.0)).collect();
        assert!((emd(&p, &q, EmdMode::Exact).unwrap() - d * d).abs() < 1e-12);
        let q = cloud(&mut rng, 64);
        let exact = emd(&p, &q, EmdMode::Exact).unwrap();
        let ent = emd(&p, &q, EmdMode::entropic()).unwrap();
        assert!((ent - exact).abs() <= 0.05 * exact, "{ent} vs {exact}");
        assert!(matches!(emd(&p, &q[..10], EmdMode::Exact), Err(Error::SizeMismatch(64, 10))));
        assert_eq!(auto_emd_mode(5, 6), EmdMode::entropic());
    }

    #[test]
    fn report_display_and_requirements() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = cloud(&mut rng, 20);
        let r = metric_report(&p, None, &p, None, &ReportOptions::default()).unwrap();
        assert_eq!((r.chamfer, r.hausdorff, r.fscore), (0.0, 0.0, 1.0));
        assert!(r.to_string().contains("fscore@0.01"));
        let strict = ReportOptions { require_normals: true, ..ReportOptions::default() };
        assert!(matches!(metric_report(&p, None, &p, None, &strict), Err(Error::MissingNormals)));
    }
}
