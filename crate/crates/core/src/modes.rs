//! Single-particle mode space: quadrature grids, dispersion relations, form
//! factors, weighted scale norms, and the ultraviolet divergence grading.
//!
//! The abstract measure space is realized as a one-dimensional momentum
//! half-line with explicit quadrature nodes and weights. A form factor is a
//! complex amplitude per node plus a declared tail class; the tail carries
//! the asymptotics that a finite grid cannot. Divergence is graded twice,
//! analytically from the tail and empirically from nested partial sums, and
//! the two channels must agree.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{self, GrowthFit, GrowthVerdict};
use crate::linalg::{C64, HermitianEig};

/// Dispersion relation omega(k), bounded below by the boson mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Dispersion {
    /// omega(k) = sqrt(k^2 + mass^2)
    Massive { mass: f64 },
    /// omega(k) = k
    Linear,
    /// omega(k) = value
    Constant { value: f64 },
}

impl Dispersion {
    pub fn eval(&self, k: f64) -> f64 {
        match *self {
            Dispersion::Massive { mass } => (k * k + mass * mass).sqrt(),
            Dispersion::Linear => k,
            Dispersion::Constant { value } => value,
        }
    }

    /// Growth exponent b with omega(k) ~ k^b for large k.
    pub fn growth_exponent(&self) -> f64 {
        match *self {
            Dispersion::Massive { .. } | Dispersion::Linear => 1.0,
            Dispersion::Constant { .. } => 0.0,
        }
    }
}

/// Discretized single-particle space: strictly increasing momentum nodes,
/// positive quadrature weights, and the dispersion sampled on the nodes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    omega: Vec<f64>,
    dispersion: Dispersion,
    mass_floor: f64,
}

impl ModeGrid {
    /// Build a grid from explicit nodes and weights.
    pub fn from_nodes(
        nodes: Vec<f64>,
        weights: Vec<f64>,
        dispersion: Dispersion,
        mass_floor: f64,
    ) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidGrid("grid needs at least one node".into()));
        }
        if nodes.len() != weights.len() {
            return Err(Error::InvalidGrid(format!(
                "{} nodes but {} weights",
                nodes.len(),
                weights.len()
            )));
        }
        if mass_floor <= 0.0 || mass_floor.is_nan() {
            return Err(Error::InvalidGrid("mass floor must be positive".into()));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("nodes must be strictly increasing".into()));
        }
        if weights.iter().any(|&w| w <= 0.0 || w.is_nan()) {
            return Err(Error::InvalidGrid("weights must be strictly positive".into()));
        }
        let omega: Vec<f64> = nodes.iter().map(|&k| dispersion.eval(k)).collect();
        if let Some((i, &w)) = omega.iter().enumerate().find(|(_, &w)| w < mass_floor) {
            return Err(Error::InvalidGrid(format!(
                "omega({}) = {w} undercuts the mass floor {mass_floor}",
                nodes[i]
            )));
        }
        Ok(Self {
            nodes,
            weights,
            omega,
            dispersion,
            mass_floor,
        })
    }

    /// Uniform grid on [k_min, k_max] with trapezoid weights.
    pub fn uniform(
        k_min: f64,
        k_max: f64,
        n: usize,
        dispersion: Dispersion,
        mass_floor: f64,
    ) -> Result<Self> {
        if n < 1 || (n == 1 && k_max != k_min) || (n > 1 && k_max <= k_min) {
            return Err(Error::InvalidGrid(format!(
                "bad uniform grid: [{k_min}, {k_max}] with {n} nodes"
            )));
        }
        if n == 1 {
            return Self::from_nodes(vec![k_min], vec![1.0], dispersion, mass_floor);
        }
        let dk = (k_max - k_min) / (n - 1) as f64;
        let nodes: Vec<f64> = (0..n).map(|i| k_min + dk * i as f64).collect();
        let weights = trapezoid_weights(&nodes);
        Self::from_nodes(nodes, weights, dispersion, mass_floor)
    }

    /// Geometrically spaced grid on [k_min, k_max] with trapezoid weights.
    /// Reaches many decades of momentum with few nodes, which is what the
    /// divergence ladders need.
    pub fn geometric(
        k_min: f64,
        k_max: f64,
        n: usize,
        dispersion: Dispersion,
        mass_floor: f64,
    ) -> Result<Self> {
        if n < 2 || k_max <= k_min || k_min <= 0.0 {
            return Err(Error::InvalidGrid(format!(
                "bad geometric grid: [{k_min}, {k_max}] with {n} nodes"
            )));
        }
        let ratio = (k_max / k_min).powf(1.0 / (n - 1) as f64);
        let nodes: Vec<f64> = (0..n).map(|i| k_min * ratio.powi(i as i32)).collect();
        let weights = trapezoid_weights(&nodes);
        Self::from_nodes(nodes, weights, dispersion, mass_floor)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn dispersion(&self) -> Dispersion {
        self.dispersion
    }

    pub fn mass_floor(&self) -> f64 {
        self.mass_floor
    }

    pub fn min_node(&self) -> f64 {
        self.nodes[0]
    }

    pub fn max_node(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    fn check_factor(&self, f: &FormFactor) -> Result<()> {
        if f.values.len() != self.len() {
            return Err(Error::GridMismatch {
                factor: f.values.len(),
                grid: self.len(),
            });
        }
        Ok(())
    }

    /// Weighted scale norm: sqrt( sum_i w_i omega_i^s |f_i|^2 ).
    /// s = 0 is the plain quadrature norm; negative s admits stronger
    /// ultraviolet growth.
    pub fn scale_norm(&self, f: &FormFactor, s: f64) -> Result<f64> {
        self.check_factor(f)?;
        let sum: f64 = self
            .weights
            .iter()
            .zip(&self.omega)
            .zip(&f.values)
            .map(|((&w, &om), v)| w * om.powf(s) * v.norm_sqr())
            .sum();
        Ok(sum.sqrt())
    }

    /// Quadrature pairing sum_i w_i conj(f_i) g_i. Conjugate-symmetric.
    pub fn pairing(&self, f: &FormFactor, g: &FormFactor) -> Result<C64> {
        self.check_factor(f)?;
        self.check_factor(g)?;
        Ok(self
            .weights
            .iter()
            .zip(&f.values)
            .zip(&g.values)
            .map(|((&w, fv), gv)| fv.conj() * gv * w)
            .sum())
    }
}

fn trapezoid_weights(nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut w = vec![0.0; n];
    for i in 0..n {
        let left = if i > 0 { nodes[i] - nodes[i - 1] } else { 0.0 };
        let right = if i + 1 < n { nodes[i + 1] - nodes[i] } else { 0.0 };
        w[i] = 0.5 * (left + right);
    }
    w
}

/// Declared large-k behaviour of a form factor. A finite grid cannot decide
/// integrability, so each factor carries its asymptotics as data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Tail {
    /// |f(k)| ~ k^amplitude while omega(k) ~ k^dispersion.
    Power { amplitude: f64, dispersion: f64 },
    /// Identically zero beyond a finite momentum.
    Compact,
}

/// Ultraviolet divergence grade, ordered by severity.
///
/// Case0: the factor is square-integrable. Case1: it is not, but becomes so
/// after one inverse power of omega. Case2: needs two inverse powers.
/// Case3: not even two suffice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseLabel {
    Case0,
    Case1,
    Case2,
    Case3,
}

/// Coupling function sampled on a grid, plus its declared tail class.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FormFactor {
    pub values: Vec<C64>,
    pub tail: Tail,
    pub label: String,
}

impl FormFactor {
    pub fn new(values: Vec<C64>, tail: Tail, label: impl Into<String>) -> Self {
        Self {
            values,
            tail,
            label: label.into(),
        }
    }

    /// Sample a function of momentum on the grid.
    pub fn from_fn(
        grid: &ModeGrid,
        tail: Tail,
        label: impl Into<String>,
        f: impl Fn(f64) -> C64,
    ) -> Self {
        let values = grid.nodes().iter().map(|&k| f(k)).collect();
        Self::new(values, tail, label)
    }

    pub fn zero(grid: &ModeGrid) -> Self {
        Self::new(vec![C64::new(0.0, 0.0); grid.len()], Tail::Compact, "zero")
    }

    /// Pointwise linear combination sum_j c_j f_j. The tail keeps the least
    /// decaying participating power; with any compact summand dropped.
    pub fn linear_combination(
        coeffs: &[C64],
        factors: &[&FormFactor],
        label: impl Into<String>,
    ) -> Result<Self> {
        if coeffs.len() != factors.len() || factors.is_empty() {
            return Err(Error::Invalid("combination needs matching coefficient/factor counts".into()));
        }
        let len = factors[0].values.len();
        if factors.iter().any(|f| f.values.len() != len) {
            return Err(Error::Invalid("factors live on different grids".into()));
        }
        let mut values = vec![C64::new(0.0, 0.0); len];
        for (c, f) in coeffs.iter().zip(factors) {
            for (v, fv) in values.iter_mut().zip(&f.values) {
                *v += c * fv;
            }
        }
        let tail = coeffs
            .iter()
            .zip(factors)
            .filter(|(c, _)| c.norm() > 0.0)
            .map(|(_, f)| f.tail)
            .fold(Tail::Compact, |acc, t| match (acc, t) {
                (Tail::Compact, t) => t,
                (a, Tail::Compact) => a,
                (
                    Tail::Power { amplitude: a1, dispersion: b1 },
                    Tail::Power { amplitude: a2, .. },
                ) => Tail::Power {
                    amplitude: a1.max(a2),
                    dispersion: b1,
                },
            });
        Ok(Self::new(values, tail, label))
    }
}

/// Sharp cutoff: keep the factor on nodes with k <= cutoff (closed), zero
/// above. Idempotent; the result is compactly supported.
pub fn truncate(f: &FormFactor, cutoff: f64, grid: &ModeGrid) -> Result<FormFactor> {
    grid.check_factor(f)?;
    if cutoff < grid.min_node() {
        return Err(Error::CutoffBelowGrid {
            cutoff,
            min_node: grid.min_node(),
        });
    }
    let values = grid
        .nodes()
        .iter()
        .zip(&f.values)
        .map(|(&k, v)| if k <= cutoff { *v } else { C64::new(0.0, 0.0) })
        .collect();
    Ok(FormFactor::new(
        values,
        Tail::Compact,
        format!("{}|cut{:.6}", f.label, cutoff),
    ))
}

/// A base factor with an increasing schedule of sharp cutoffs and the
/// truncations it generates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CutoffFamily {
    pub base: FormFactor,
    pub cutoffs: Vec<f64>,
    pub realized: Vec<FormFactor>,
}

impl CutoffFamily {
    pub fn new(base: FormFactor, cutoffs: Vec<f64>, grid: &ModeGrid) -> Result<Self> {
        if cutoffs.is_empty() {
            return Err(Error::Invalid("cutoff schedule is empty".into()));
        }
        if cutoffs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Invalid("cutoffs must be strictly increasing".into()));
        }
        let realized: Vec<FormFactor> = cutoffs
            .iter()
            .map(|&l| truncate(&base, l, grid))
            .collect::<Result<_>>()?;
        // On a fixed grid the H_{-1} gap to the base factor can only shrink
        // as the cutoff grows.
        let mut prev = f64::INFINITY;
        for r in &realized {
            let diff = FormFactor::linear_combination(
                &[C64::new(1.0, 0.0), C64::new(-1.0, 0.0)],
                &[r, &base],
                "gap",
            )?;
            let d = grid.scale_norm(&diff, -1.0)?;
            debug_assert!(d <= prev + 1e-12, "cutoff gap increased along the schedule");
            prev = d;
        }
        Ok(Self {
            base,
            cutoffs,
            realized,
        })
    }
}

/// Number of checkpoints for the empirical divergence ladder.
pub const DEFAULT_LADDER_RUNGS: usize = 8;

const MIN_LADDER_RUNGS: usize = 6;

fn analytic_integral_diverges(tail: Tail, inverse_omega_power: u32) -> bool {
    match tail {
        Tail::Compact => false,
        Tail::Power { amplitude, dispersion } => {
            // integrand |f|^2 omega^{-p} ~ k^(2a - p b); the borderline
            // exponent -1 integrates to a logarithm, counted divergent.
            2.0 * amplitude - inverse_omega_power as f64 * dispersion >= -1.0
        }
    }
}

/// Divergence grade implied by a declared tail alone.
pub fn analytic_case_of(tail: Tail) -> CaseLabel {
    if !analytic_integral_diverges(tail, 0) {
        CaseLabel::Case0
    } else if !analytic_integral_diverges(tail, 1) {
        CaseLabel::Case1
    } else if !analytic_integral_diverges(tail, 2) {
        CaseLabel::Case2
    } else {
        CaseLabel::Case3
    }
}

/// Partial sums of w |f|^2 omega^{-p} up to geometrically spaced extents.
fn partial_integral_ladder(
    f: &FormFactor,
    grid: &ModeGrid,
    p: i32,
    rungs: usize,
) -> (Vec<f64>, Vec<f64>) {
    let k_lo = grid.min_node();
    let k_hi = grid.max_node();
    let extents: Vec<f64> = (1..=rungs)
        .map(|m| k_lo * (k_hi / k_lo).powf(m as f64 / rungs as f64))
        .collect();
    let mut sums = Vec::with_capacity(rungs);
    let mut acc = 0.0;
    let mut idx = 0;
    for &cap in &extents {
        while idx < grid.len() && grid.nodes()[idx] <= cap {
            acc += grid.weights()[idx] * f.values[idx].norm_sqr() * grid.omega()[idx].powi(-p);
            idx += 1;
        }
        sums.push(acc);
    }
    (extents, sums)
}

fn empirical_verdict(f: &FormFactor, grid: &ModeGrid, p: i32, rungs: usize) -> GrowthFit {
    let (extents, sums) = partial_integral_ladder(f, grid, p, rungs);
    fit::classify_growth(&extents, &sums)
}

fn empirical_case(f: &FormFactor, grid: &ModeGrid, rungs: usize) -> std::result::Result<CaseLabel, String> {
    for (p, label) in [(0, CaseLabel::Case0), (1, CaseLabel::Case1), (2, CaseLabel::Case2)] {
        match empirical_verdict(f, grid, p, rungs).verdict {
            GrowthVerdict::Bounded => return Ok(label),
            GrowthVerdict::Divergent => continue,
            GrowthVerdict::Inconclusive => {
                return Err(format!(
                    "partial integrals with omega^-{p} neither settle nor fit a positive power"
                ))
            }
        }
    }
    Ok(CaseLabel::Case3)
}

/// Grade the ultraviolet divergence of a form factor.
///
/// The declared tail fixes the analytic grade; nested partial sums of
/// w |f|^2 omega^{-p} over geometrically spaced sub-extents fix the
/// empirical one. A disagreement (or an unreadable ladder) aborts: it means
/// the declared tail does not describe the sampled values, or the grid does
/// not reach far enough to measure them.
pub fn classify_divergence(f: &FormFactor, grid: &ModeGrid) -> Result<CaseLabel> {
    classify_divergence_with(f, grid, DEFAULT_LADDER_RUNGS)
}

pub fn classify_divergence_with(f: &FormFactor, grid: &ModeGrid, rungs: usize) -> Result<CaseLabel> {
    grid.check_factor(f)?;
    if rungs < MIN_LADDER_RUNGS {
        return Err(Error::LadderTooShort {
            got: rungs,
            min: MIN_LADDER_RUNGS,
        });
    }
    let analytic = analytic_case_of(f.tail);
    let empirical = empirical_case(f, grid, rungs)
        .map_err(|e| Error::ClassificationConflict {
            analytic,
            empirical: e,
        })?;
    if empirical != analytic {
        return Err(Error::ClassificationConflict {
            analytic,
            empirical: format!("{empirical:?}"),
        });
    }
    Ok(analytic)
}

/// Minimum Gram eigenvalue per grid of a family of form factors, with a
/// growth verdict along the ladder.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndependenceReport {
    /// k-extent of each ladder grid.
    pub extents: Vec<f64>,
    /// Smallest eigenvalue of the unweighted Gram matrix per grid.
    pub min_eigenvalues: Vec<f64>,
    pub fit: GrowthFit,
    /// True when the minimum Gram eigenvalue grows unboundedly along the
    /// ladder: no unit combination of the factors stays square-integrable.
    pub independent: bool,
}

/// Measure mutual square-integrability of a factor family over a nested
/// grid ladder.
///
/// On any finite grid every factor is square-integrable, so independence in
/// the continuum sense is probed by a surrogate: the minimum eigenvalue of
/// the plain (s = 0) Gram matrix must diverge as the grids extend. A family
/// with a square-integrable combination pins that eigenvalue down.
pub fn h_independence_margin(
    grids: &[ModeGrid],
    factors_per_grid: &[Vec<FormFactor>],
) -> Result<IndependenceReport> {
    if grids.len() != factors_per_grid.len() {
        return Err(Error::Invalid("one factor family per ladder grid required".into()));
    }
    if grids.len() < 2 {
        return Err(Error::LadderTooShort {
            got: grids.len(),
            min: 2,
        });
    }
    let n = factors_per_grid[0].len();
    if n == 0 {
        return Err(Error::Invalid("need at least one form factor".into()));
    }
    if factors_per_grid.iter().any(|fs| fs.len() != n) {
        return Err(Error::Invalid("factor family size changes along the ladder".into()));
    }
    for w in grids.windows(2) {
        if (w[0].min_node() - w[1].min_node()).abs() > 1e-9 * w[0].min_node().abs().max(1.0) {
            return Err(Error::NonNestedGrids("lower ends differ".into()));
        }
        if w[1].max_node() <= w[0].max_node() {
            return Err(Error::NonNestedGrids("k-extent does not increase".into()));
        }
    }
    let mut extents = Vec::with_capacity(grids.len());
    let mut min_eigenvalues = Vec::with_capacity(grids.len());
    for (grid, fs) in grids.iter().zip(factors_per_grid) {
        let mut gram = DMatrix::<C64>::zeros(n, n);
        for j in 0..n {
            for l in 0..n {
                gram[(j, l)] = grid.pairing(&fs[j], &fs[l])?;
            }
        }
        let eig = HermitianEig::new(&gram, 1e-8)?;
        extents.push(grid.max_node());
        min_eigenvalues.push(eig.min_value().max(0.0));
    }
    let fit = fit::classify_growth(&extents, &min_eigenvalues);
    Ok(IndependenceReport {
        extents,
        min_eigenvalues,
        fit,
        independent: fit.verdict == GrowthVerdict::Divergent,
    })
}

/// Recipe for realizing a form factor on any grid, used by presets and by
/// run configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FormFactorSpec {
    /// f(k) = scale * omega(k)^exponent
    OmegaPower { exponent: f64, #[serde(default = "one")] scale: f64 },
    /// f(k) = scale * k^exponent
    Power { exponent: f64, #[serde(default = "one")] scale: f64 },
    /// f(k) = re + i im
    Constant { re: f64, im: f64 },
    /// f(k) = scale * k^exponent * (-1)^floor(log2 k); sign flips on dyadic
    /// blocks.
    DyadicAlternating { exponent: f64, #[serde(default = "one")] scale: f64 },
}

fn one() -> f64 {
    1.0
}

impl FormFactorSpec {
    /// The mild-divergence default: f = omega^{-1/4}.
    pub fn default_case1() -> Self {
        FormFactorSpec::OmegaPower {
            exponent: -0.25,
            scale: 1.0,
        }
    }

    pub fn realize(&self, grid: &ModeGrid) -> FormFactor {
        let b = grid.dispersion().growth_exponent();
        match *self {
            FormFactorSpec::OmegaPower { exponent, scale } => FormFactor::from_fn(
                grid,
                Tail::Power {
                    amplitude: exponent * b,
                    dispersion: b,
                },
                format!("omega^{exponent}*{scale}"),
                |k| C64::new(scale * grid.dispersion().eval(k).powf(exponent), 0.0),
            ),
            FormFactorSpec::Power { exponent, scale } => FormFactor::from_fn(
                grid,
                Tail::Power {
                    amplitude: exponent,
                    dispersion: b,
                },
                format!("k^{exponent}*{scale}"),
                |k| C64::new(scale * k.powf(exponent), 0.0),
            ),
            FormFactorSpec::Constant { re, im } => FormFactor::from_fn(
                grid,
                Tail::Power {
                    amplitude: 0.0,
                    dispersion: b,
                },
                format!("const({re},{im})"),
                |_| C64::new(re, im),
            ),
            FormFactorSpec::DyadicAlternating { exponent, scale } => FormFactor::from_fn(
                grid,
                Tail::Power {
                    amplitude: exponent,
                    dispersion: b,
                },
                format!("dyadic k^{exponent}*{scale}"),
                |k| {
                    let sign = if (k.log2().floor() as i64) % 2 == 0 { 1.0 } else { -1.0 };
                    C64::new(scale * sign * k.powf(exponent), 0.0)
                },
            ),
        }
    }
}
