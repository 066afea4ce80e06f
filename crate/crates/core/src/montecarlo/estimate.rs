//! Box-count estimators and their comparison with kernel predictions.

use serde::{Deserialize, Serialize};

use super::sampling::SampleBatch;
use crate::error::{Error, Result};
use crate::gue::gue_minor_kernel;
use crate::kernel::{kernel_fixed_top, KernelSpec};
use crate::numeric::{GaussRule, NeumaierSum};

/// Half-open window `[lo, hi)` on one level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountBox {
    pub level: usize,
    pub lo: f64,
    pub hi: f64,
}

impl CountBox {
    pub fn new(level: usize, lo: f64, hi: f64) -> Self {
        CountBox { level, lo, hi }
    }

    fn count(&self, batch_level: &[f64]) -> u64 {
        batch_level.iter().filter(|&&y| self.lo <= y && y < self.hi).count() as u64
    }

    fn disjoint(&self, other: &CountBox) -> bool {
        self.level != other.level || self.hi <= other.lo || other.hi <= self.lo
    }

    /// `q` equal boxes tiling `[lo, hi)` on `level`.
    pub fn tiling(level: usize, lo: f64, hi: f64, q: usize) -> Vec<CountBox> {
        let h = (hi - lo) / q as f64;
        (0..q)
            .map(|i| {
                let right = if i + 1 == q { hi } else { lo + h * (i + 1) as f64 };
                CountBox::new(level, lo + h * i as f64, right)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxEstimate {
    pub samples: usize,
    pub boxes: Vec<CountBox>,
    /// Mean count per box.
    pub m1: Vec<f64>,
    pub m1_se: Vec<f64>,
    /// Index pairs `(i, j)`, `i < j`, of boxes.
    pub pairs: Vec<(usize, usize)>,
    /// Mean product of counts per pair.
    pub m2: Vec<f64>,
    pub m2_se: Vec<f64>,
}

fn mean_and_se(sum: u64, sum_sq: u64, samples: usize) -> (f64, f64) {
    let n = samples as f64;
    let mean = sum as f64 / n;
    if samples < 2 {
        return (mean, f64::NAN);
    }
    // integer sums are exact, so the variance is formed from exact moments
    let var = (sum_sq as f64 - sum as f64 * mean) / (n - 1.0);
    (mean, (var.max(0.0) / n).sqrt())
}

/// Empirical first moments of every box and second moments of every pair.
/// All pairs must be disjoint.
pub fn estimate_boxes(batch: &SampleBatch, boxes: &[CountBox]) -> Result<BoxEstimate> {
    for (i, b) in boxes.iter().enumerate() {
        if b.level == 0 || b.level > batch.n || !(b.lo < b.hi) {
            return Err(Error::InvalidParameter(format!("box {i} is not a valid window")));
        }
    }
    let mut pairs = Vec::new();
    for i in 0..boxes.len() {
        for j in i + 1..boxes.len() {
            if !boxes[i].disjoint(&boxes[j]) {
                return Err(Error::OverlappingBoxes { first: i, second: j });
            }
            pairs.push((i, j));
        }
    }
    let k = boxes.len();
    let mut s1 = vec![0u64; k];
    let mut q1 = vec![0u64; k];
    let mut s2 = vec![0u64; pairs.len()];
    let mut q2 = vec![0u64; pairs.len()];
    let mut counts = vec![0u64; k];
    for p in &batch.patterns {
        for (c, b) in counts.iter_mut().zip(boxes) {
            *c = b.count(p.level(b.level));
        }
        for i in 0..k {
            s1[i] += counts[i];
            q1[i] += counts[i] * counts[i];
        }
        for (idx, &(i, j)) in pairs.iter().enumerate() {
            let prod = counts[i] * counts[j];
            s2[idx] += prod;
            q2[idx] += prod * prod;
        }
    }
    let samples = batch.patterns.len();
    if samples == 0 {
        return Err(Error::InvalidParameter("empty batch".into()));
    }
    let (m1, m1_se) = (0..k).map(|i| mean_and_se(s1[i], q1[i], samples)).unzip();
    let (m2, m2_se) = (0..pairs.len()).map(|i| mean_and_se(s2[i], q2[i], samples)).unzip();
    Ok(BoxEstimate {
        samples,
        boxes: boxes.to_vec(),
        m1,
        m1_se,
        pairs,
        m2,
        m2_se,
    })
}

/// A correlation kernel on `{1..levels} x R`.
pub trait CorrelationKernel: Sync {
    fn eval(&self, r: usize, u: f64, s: usize, v: f64) -> Result<f64>;
    /// Highest level the kernel is defined on.
    fn max_level(&self) -> usize;
    /// Points where the kernel may fail to be smooth in either argument.
    fn breaks(&self) -> Vec<f64>;
}

impl CorrelationKernel for KernelSpec {
    fn eval(&self, r: usize, u: f64, s: usize, v: f64) -> Result<f64> {
        kernel_fixed_top(self, r, s, u, v)
    }

    fn max_level(&self) -> usize {
        self.n() - 1
    }

    fn breaks(&self) -> Vec<f64> {
        self.spectrum().values().to_vec()
    }
}

/// GUE minor-process kernel of a given size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GueKernel {
    pub n: usize,
}

impl CorrelationKernel for GueKernel {
    fn eval(&self, r: usize, u: f64, s: usize, v: f64) -> Result<f64> {
        gue_minor_kernel(self.n, r, u, s, v)
    }

    fn max_level(&self) -> usize {
        self.n
    }

    fn breaks(&self) -> Vec<f64> {
        Vec::new()
    }
}

const MODEL_ORDER: usize = 24;
const MODEL_TOL: f64 = 1e-8;
/// Widest panel used by the model integrals (Gaussian tails need several).
const MAX_PANEL: f64 = 1.0;

fn split(lo: f64, hi: f64, breaks: &[f64]) -> Vec<f64> {
    let mut e = vec![lo];
    e.extend(breaks.iter().copied().filter(|&b| b > lo && b < hi));
    e.push(hi);
    e.sort_by(|a, b| a.partial_cmp(b).unwrap());
    e.dedup();
    let mut out = vec![lo];
    for w in e.windows(2) {
        let pieces = ((w[1] - w[0]) / MAX_PANEL).ceil().max(1.0) as usize;
        let h = (w[1] - w[0]) / pieces as f64;
        out.extend((1..pieces).map(|i| w[0] + h * i as f64));
        out.push(w[1]);
    }
    out
}

fn integrate<F: FnMut(f64) -> Result<f64>>(rule: &GaussRule, edges: &[f64], mut f: F) -> Result<f64> {
    let mut acc = NeumaierSum::new();
    for w in edges.windows(2) {
        acc.add(rule.try_integrate(w[0], w[1], &mut f)?);
    }
    Ok(acc.value())
}

fn with_refinement<F: Fn(&GaussRule) -> Result<f64>>(f: F) -> Result<f64> {
    let coarse = f(&GaussRule::new(MODEL_ORDER))?;
    let fine = f(&GaussRule::new(2 * MODEL_ORDER))?;
    let discrepancy = (fine - coarse).abs();
    if discrepancy > MODEL_TOL * fine.abs().max(1.0) {
        return Err(Error::QuadratureNonConvergence {
            estimate: fine,
            discrepancy,
        });
    }
    Ok(fine)
}

/// `int_box K(p, p) dp`.
pub fn model_m1(kernel: &dyn CorrelationKernel, b: &CountBox) -> Result<f64> {
    let edges = split(b.lo, b.hi, &kernel.breaks());
    with_refinement(|rule| integrate(rule, &edges, |u| kernel.eval(b.level, u, b.level, u)))
}

/// `int_A int_B det [[K(a,a), K(a,b)], [K(b,a), K(b,b)]]`.
///
/// The inner panels are split at the outer point as well, since the
/// multi-level kernels jump across the diagonal; the inner integral in turn
/// jumps where the diagonal crosses the edges of `b`.
pub fn model_m2(kernel: &dyn CorrelationKernel, a: &CountBox, b: &CountBox) -> Result<f64> {
    let breaks = kernel.breaks();
    let mut outer_breaks = breaks.clone();
    outer_breaks.extend([b.lo, b.hi]);
    let outer = split(a.lo, a.hi, &outer_breaks);
    with_refinement(|rule| {
        integrate(rule, &outer, |u| {
            let kaa = kernel.eval(a.level, u, a.level, u)?;
            let mut inner_breaks = breaks.clone();
            inner_breaks.push(u);
            let inner = split(b.lo, b.hi, &inner_breaks);
            integrate(rule, &inner, |v| {
                let kbb = kernel.eval(b.level, v, b.level, v)?;
                let kab = kernel.eval(a.level, u, b.level, v)?;
                let kba = kernel.eval(b.level, v, a.level, u)?;
                Ok(kaa * kbb - kab * kba)
            })
        })
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationRow {
    /// `m1` or `m2`.
    pub statistic: String,
    /// Box index, or `i:j` for a pair.
    pub label: String,
    pub estimate: f64,
    pub se: f64,
    pub model: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub samples: usize,
    pub z_threshold: f64,
    pub rows: Vec<VerificationRow>,
}

impl VerificationReport {
    pub fn max_abs_z(&self) -> f64 {
        self.rows.iter().map(|r| r.z.abs()).fold(0.0, f64::max)
    }

    pub fn flagged(&self) -> Vec<&VerificationRow> {
        self.rows.iter().filter(|r| !(r.z.abs() <= self.z_threshold)).collect()
    }

    pub fn passed(&self) -> bool {
        self.flagged().is_empty()
    }

    /// `statistic,box,estimate,se,model,z`, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("statistic,box,estimate,se,model,z\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                r.statistic, r.label, r.estimate, r.se, r.model, r.z
            ));
        }
        out
    }
}

fn z_score(estimate: f64, se: f64, model: f64) -> f64 {
    let diff = estimate - model;
    if se > 0.0 {
        diff / se
    } else if diff.abs() <= 1e-9 * model.abs().max(1.0) {
        // variance-free statistics (e.g. a box covering a whole level)
        0.0
    } else {
        diff.signum() * f64::INFINITY
    }
}

/// Compare empirical box moments with kernel integrals; rows with
/// `|z| > z_threshold` are flagged.
pub fn verify_determinantal(
    batch: &SampleBatch,
    kernel: &dyn CorrelationKernel,
    boxes: &[CountBox],
    z_threshold: f64,
) -> Result<VerificationReport> {
    if let Some(b) = boxes.iter().find(|b| b.level > kernel.max_level()) {
        return Err(Error::LevelOutOfRange {
            level: b.level,
            max: kernel.max_level(),
        });
    }
    let est = estimate_boxes(batch, boxes)?;
    let mut rows = Vec::new();
    for (i, b) in boxes.iter().enumerate() {
        let model = model_m1(kernel, b)?;
        rows.push(VerificationRow {
            statistic: "m1".into(),
            label: i.to_string(),
            estimate: est.m1[i],
            se: est.m1_se[i],
            model,
            z: z_score(est.m1[i], est.m1_se[i], model),
        });
    }
    for (idx, &(i, j)) in est.pairs.iter().enumerate() {
        let model = model_m2(kernel, &boxes[i], &boxes[j])?;
        rows.push(VerificationRow {
            statistic: "m2".into(),
            label: format!("{i}:{j}"),
            estimate: est.m2[idx],
            se: est.m2_se[idx],
            model,
            z: z_score(est.m2[idx], est.m2_se[idx], model),
        });
    }
    Ok(VerificationReport {
        samples: est.samples,
        z_threshold,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montecarlo::sampling::SampleSource;
    use crate::patterns::Spectrum;

    fn two_level(samples: usize) -> SampleBatch {
        SampleBatch::generate(SampleSource::FixedSpectrum { values: vec![1.0, 0.0] }, 2, samples, 17).unwrap()
    }

    #[test]
    fn counting_examples() {
        let batch = two_level(2000);
        let full = estimate_boxes(&batch, &[CountBox::new(2, -1.0, 2.0)]).unwrap();
        assert_eq!(full.m1[0], 2.0);
        assert_eq!(full.m1_se[0], 0.0);
        let est = estimate_boxes(&batch, &[CountBox::new(1, 0.0, 0.5), CountBox::new(1, 0.5, 1.0)]).unwrap();
        assert_eq!(est.m2[0], 0.0);
        let overlap = estimate_boxes(&batch, &[CountBox::new(1, 0.0, 0.5), CountBox::new(1, 0.4, 1.0)]);
        assert!(matches!(overlap, Err(Error::OverlappingBoxes { first: 0, second: 1 })));
    }

    #[test]
    fn uniform_level_one() {
        let batch = two_level(100_000);
        let est = estimate_boxes(&batch, &[CountBox::new(1, 0.4, 0.6)]).unwrap();
        assert!((est.m1[0] - 0.2).abs() < 3.0 * est.m1_se[0]);
        let spec = KernelSpec::from_values(vec![1.0, 0.0]).unwrap();
        let report = verify_determinantal(&batch, &spec, &CountBox::tiling(1, 0.0, 1.0, 4), 3.0).unwrap();
        assert!(report.passed(), "{}", report.to_csv());
        assert!((report.rows[0].model - 0.25).abs() < 1e-12);
    }

    #[test]
    fn models_are_consistent() {
        // the pair model over a tiling sums to E[N(N-1)] - sum of the diagonal pair terms;
        // on one level with q particles: sum_i m1 = q
        let spec = KernelSpec::new(Spectrum::equispaced(6).unwrap());
        let boxes = CountBox::tiling(3, 0.0, 1.0, 3);
        let total: f64 = boxes.iter().map(|b| model_m1(&spec, b).unwrap()).sum();
        assert!((total - 3.0).abs() < 1e-9);
        let g = GueKernel { n: 3 };
        let m = model_m1(&g, &CountBox::new(2, -12.0, 12.0)).unwrap();
        assert!((m - 2.0).abs() < 1e-8);
    }

    #[test]
    fn level_guard() {
        let batch = two_level(10);
        let spec = KernelSpec::from_values(vec![1.0, 0.0]).unwrap();
        assert!(matches!(
            verify_determinantal(&batch, &spec, &[CountBox::new(2, 0.0, 1.0)], 3.0),
            Err(Error::LevelOutOfRange { .. })
        ));
    }
}
