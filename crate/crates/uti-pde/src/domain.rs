//! Grids, boundary signals, solution fields and certificates.

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::special::{expm1, psi, psi3, C0, I};

const EXP_GUARD: f64 = 700.0;

/// Time nodes `0 = t_0 < t_1 < ... < t_{n-1} = T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    nodes: Vec<f64>,
    uniform: bool,
}

impl TimeGrid {
    pub fn uniform(t_end: f64, n_nodes: usize) -> Result<Self> {
        if !(t_end > 0.0) || !t_end.is_finite() {
            return invalid(format!("time horizon must be positive and finite, got {t_end}"));
        }
        if n_nodes < 2 {
            return invalid(format!("a time grid needs at least 2 nodes, got {n_nodes}"));
        }
        let h = t_end / (n_nodes - 1) as f64;
        let mut nodes: Vec<f64> = (0..n_nodes).map(|i| i as f64 * h).collect();
        nodes[n_nodes - 1] = t_end;
        Ok(Self { nodes, uniform: true })
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return invalid("a time grid needs at least 2 nodes");
        }
        if nodes[0] != 0.0 {
            return invalid(format!("time grid must start at 0, got {}", nodes[0]));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) || !nodes.iter().all(|t| t.is_finite()) {
            return invalid("time grid nodes must be finite and strictly increasing");
        }
        Ok(Self { nodes, uniform: false })
    }

    pub fn t_end(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Constant spacing, when the grid was built by [`TimeGrid::uniform`].
    pub fn spacing(&self) -> Option<f64> {
        self.uniform.then(|| self.t_end() / (self.nodes.len() - 1) as f64)
    }

    pub fn trapezoid_weights(&self) -> Vec<f64> {
        trapezoid_weights(&self.nodes)
    }
}

/// Space nodes inside `[0, ell]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceGrid {
    ell: f64,
    nodes: Vec<f64>,
}

impl SpaceGrid {
    pub fn uniform(ell: f64, n_nodes: usize) -> Result<Self> {
        if !(ell > 0.0) || !ell.is_finite() {
            return invalid(format!("interval length must be positive, got {ell}"));
        }
        if n_nodes < 2 {
            return invalid(format!("a space grid needs at least 2 nodes, got {n_nodes}"));
        }
        let h = ell / (n_nodes - 1) as f64;
        let mut nodes: Vec<f64> = (0..n_nodes).map(|i| i as f64 * h).collect();
        nodes[n_nodes - 1] = ell;
        Ok(Self { ell, nodes })
    }

    pub fn from_nodes(ell: f64, nodes: Vec<f64>) -> Result<Self> {
        if !(ell > 0.0) {
            return invalid(format!("interval length must be positive, got {ell}"));
        }
        if nodes.is_empty() {
            return invalid("a space grid needs at least one node");
        }
        if nodes.iter().any(|&x| !(0.0..=ell).contains(&x)) {
            return invalid("space nodes must lie in [0, ell]");
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return invalid("space nodes must be strictly increasing");
        }
        Ok(Self { ell, nodes })
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn trapezoid_weights(&self) -> Vec<f64> {
        trapezoid_weights(&self.nodes)
    }
}

pub(crate) fn trapezoid_weights(nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut w = vec![0.0; n];
    for i in 0..n.saturating_sub(1) {
        let h = nodes[i + 1] - nodes[i];
        w[i] += 0.5 * h;
        w[i + 1] += 0.5 * h;
    }
    w
}

/// One term `amplitude * sin(omega t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrigTerm {
    pub amplitude: f64,
    pub omega: f64,
    pub phase: f64,
}

/// `offset + slope t + sum of trig terms`, tagged with the name and
/// parameters it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedForm {
    name: String,
    params: Vec<f64>,
    offset: f64,
    slope: f64,
    terms: Vec<TrigTerm>,
}

impl ClosedForm {
    pub fn new(name: impl Into<String>, params: Vec<f64>, offset: f64, slope: f64, terms: Vec<TrigTerm>) -> Self {
        Self { name: name.into(), params, offset, slope, terms }
    }

    pub fn zero() -> Self {
        Self::new("zero", vec![], 0.0, 0.0, vec![])
    }

    pub fn sine(amplitude: f64, omega: f64) -> Self {
        Self::new("sine", vec![amplitude, omega], 0.0, 0.0, vec![TrigTerm { amplitude, omega, phase: 0.0 }])
    }

    pub fn affine(offset: f64, slope: f64) -> Self {
        Self::new("affine", vec![offset, slope], offset, slope, vec![])
    }

    pub fn trig(terms: Vec<TrigTerm>) -> Self {
        let params = terms.iter().flat_map(|t| [t.amplitude, t.omega, t.phase]).collect();
        Self::new("trig", params, 0.0, 0.0, terms)
    }

    /// `A sin(omega t) sin(pi t / width)^(2 p)`, expanded into a finite trig sum.
    pub fn windowed_sine(amplitude: f64, omega: f64, width: f64, power: u32) -> Self {
        let p = power as i64;
        let nu = std::f64::consts::PI / width;
        let scale = amplitude / 4f64.powi(power as i32);
        let mut terms = vec![TrigTerm { amplitude: scale * binomial(2 * p, p), omega, phase: 0.0 }];
        for j in 1..=p {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            let amp = scale * sign * binomial(2 * p, p - j);
            let shift = 2.0 * j as f64 * nu;
            terms.push(TrigTerm { amplitude: amp, omega: omega + shift, phase: 0.0 });
            terms.push(TrigTerm { amplitude: amp, omega: omega - shift, phase: 0.0 });
        }
        Self::new("windowed_sine", vec![amplitude, omega, width, power as f64], 0.0, 0.0, terms)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn terms(&self) -> &[TrigTerm] {
        &self.terms
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.terms.iter().fold(self.offset + self.slope * t, |s, k| s + k.amplitude * (k.omega * t + k.phase).sin())
    }

    pub fn derivative(&self) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|k| TrigTerm { amplitude: k.amplitude * k.omega, omega: k.omega, phase: k.phase + std::f64::consts::FRAC_PI_2 })
            .collect();
        Self::new(format!("d/dt {}", self.name), self.params.clone(), self.slope, 0.0, terms)
    }

    fn scaled(&self, alpha: f64) -> Self {
        let terms = self.terms.iter().map(|k| TrigTerm { amplitude: alpha * k.amplitude, ..*k }).collect();
        Self::new(self.name.clone(), self.params.clone(), alpha * self.offset, alpha * self.slope, terms)
    }

    /// `int_0^t exp(c z) f(z) dz`.
    fn exp_moment(&self, c: Complex64, t: f64) -> Complex64 {
        let mut s = self.offset * t * psi(0, -c * t) + self.slope * t * t * psi(1, -c * t);
        for k in &self.terms {
            let ep = Complex64::from_polar(1.0, k.phase);
            let plus = t * phi1((c + I * k.omega) * t);
            let minus = t * phi1((c - I * k.omega) * t);
            s += k.amplitude * (ep * plus - ep.conj() * minus) / (2.0 * I);
        }
        s
    }

    /// `int_0^t exp(-c s) f(t - s) ds`.
    fn damped_moment(&self, c: Complex64, t: f64) -> Complex64 {
        let ct = c * t;
        let [p0, p1, _] = psi3(ct);
        let mut s = (self.offset + self.slope * t) * t * p0 - self.slope * t * t * p1;
        for k in &self.terms {
            let e = Complex64::from_polar(1.0, k.omega * t + k.phase);
            let plus = e * t * psi(0, (c + I * k.omega) * t);
            let minus = e.conj() * t * psi(0, (c - I * k.omega) * t);
            s += k.amplitude * (plus - minus) / (2.0 * I);
        }
        s
    }
}

fn binomial(n: i64, k: i64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `(exp(w) - 1) / w`.
fn phi1(w: Complex64) -> Complex64 {
    if w.norm() < 1e-3 {
        return psi(0, -w);
    }
    expm1(w) / w
}

/// How a boundary signal is stored.
#[derive(Debug, Clone, PartialEq)]
pub enum Representation {
    ClosedForm(ClosedForm),
    /// `sum_n c_n sin(n pi t / tau)` on `[0, tau]`, period `2 tau`.
    SineSeries {
        tau: f64,
        coefficients: Vec<f64>,
    },
    /// Piecewise-linear interpolation of nodal values.
    Samples {
        grid: TimeGrid,
        values: Vec<f64>,
    },
}

/// A function of time that vanishes after `support_end`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySignal {
    repr: Representation,
    support_end: f64,
}

impl BoundarySignal {
    pub fn zero() -> Self {
        Self::closed_form(ClosedForm::zero())
    }

    /// Closed form on the whole half-line.
    pub fn closed_form(f: ClosedForm) -> Self {
        Self { repr: Representation::ClosedForm(f), support_end: f64::INFINITY }
    }

    pub fn closed_form_until(f: ClosedForm, support_end: f64) -> Result<Self> {
        if !(support_end > 0.0) {
            return invalid(format!("support end must be positive, got {support_end}"));
        }
        Ok(Self { repr: Representation::ClosedForm(f), support_end })
    }

    pub fn sine(amplitude: f64, omega: f64) -> Self {
        Self::closed_form(ClosedForm::sine(amplitude, omega))
    }

    /// Windowed sine supported on `[0, width]`.
    pub fn windowed_sine(amplitude: f64, omega: f64, width: f64, power: u32) -> Result<Self> {
        if power == 0 {
            return invalid("window power must be at least 1");
        }
        Self::closed_form_until(ClosedForm::windowed_sine(amplitude, omega, width, power), width)
    }

    pub fn sine_series(tau: f64, coefficients: Vec<f64>) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return invalid(format!("sine-series support must be positive, got {tau}"));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return invalid("sine-series coefficients must be finite");
        }
        Ok(Self { repr: Representation::SineSeries { tau, coefficients }, support_end: tau })
    }

    pub fn samples(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return invalid(format!("{} sample values for a grid of {} nodes", values.len(), grid.n_nodes()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return invalid("sample values must be finite");
        }
        let support_end = grid.t_end();
        Ok(Self { repr: Representation::Samples { grid, values }, support_end })
    }

    /// Samples that must satisfy the compatibility condition `f(0) = 0`.
    pub fn samples_compatible(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.first().is_some_and(|&v| v != 0.0) {
            return invalid(format!("compatible samples must vanish at t = 0, got {}", values[0]));
        }
        Self::samples(grid, values)
    }

    pub fn representation(&self) -> &Representation {
        &self.repr
    }

    pub fn support_end(&self) -> f64 {
        self.support_end
    }

    pub fn is_zero(&self) -> bool {
        match &self.repr {
            Representation::ClosedForm(f) => f.offset == 0.0 && f.slope == 0.0 && f.terms.iter().all(|k| k.amplitude == 0.0),
            Representation::SineSeries { coefficients, .. } => coefficients.iter().all(|&c| c == 0.0),
            Representation::Samples { values, .. } => values.iter().all(|&v| v == 0.0),
        }
    }

    /// Value at `t`; zero before 0 and after `support_end`.
    pub fn eval(&self, t: f64) -> f64 {
        if t < 0.0 || t > self.support_end {
            return 0.0;
        }
        match &self.repr {
            Representation::ClosedForm(f) => f.eval(t),
            Representation::SineSeries { tau, coefficients } => {
                let th = std::f64::consts::PI * t / tau;
                coefficients.iter().enumerate().map(|(n, c)| c * ((n + 1) as f64 * th).sin()).sum()
            }
            Representation::Samples { grid, values } => interpolate(grid.nodes(), values, t),
        }
    }

    /// Value and first two derivatives for smooth representations.
    pub fn jet(&self, t: f64) -> Option<[f64; 3]> {
        if t < 0.0 || t > self.support_end {
            return Some([0.0; 3]);
        }
        match &self.repr {
            Representation::ClosedForm(f) => {
                let d = f.derivative();
                Some([f.eval(t), d.eval(t), d.derivative().eval(t)])
            }
            Representation::SineSeries { tau, coefficients } => {
                let mut out = [0.0; 3];
                for (n, c) in coefficients.iter().enumerate() {
                    let w = (n + 1) as f64 * std::f64::consts::PI / tau;
                    let (s, co) = (w * t).sin_cos();
                    out[0] += c * s;
                    out[1] += c * w * co;
                    out[2] -= c * w * w * s;
                }
                Some(out)
            }
            Representation::Samples { .. } => None,
        }
    }

    /// Time derivative of a closed form or sine series (cosine terms become
    /// phase-shifted sines, so a sine series maps to a closed form).
    pub fn derivative(&self) -> Result<Self> {
        match &self.repr {
            Representation::ClosedForm(f) => Ok(Self { repr: Representation::ClosedForm(f.derivative()), support_end: self.support_end }),
            Representation::SineSeries { tau, coefficients } => {
                let terms = coefficients
                    .iter()
                    .enumerate()
                    .map(|(n, c)| {
                        let w = (n + 1) as f64 * std::f64::consts::PI / tau;
                        TrigTerm { amplitude: c * w, omega: w, phase: std::f64::consts::FRAC_PI_2 }
                    })
                    .collect();
                Self::closed_form_until(ClosedForm::trig(terms), *tau)
            }
            Representation::Samples { .. } => invalid("samples carry no derivative"),
        }
    }

    pub fn sampled(&self, grid: &TimeGrid) -> Vec<f64> {
        grid.nodes().iter().map(|&t| self.eval(t)).collect()
    }

    /// `alpha * s1 + beta * s2` for sine series of matching period and size,
    /// or samples on the same grid.
    pub fn linear_combination(alpha: f64, s1: &Self, beta: f64, s2: &Self) -> Result<Self> {
        match (&s1.repr, &s2.repr) {
            (Representation::SineSeries { tau: t1, coefficients: c1 }, Representation::SineSeries { tau: t2, coefficients: c2 })
                if t1 == t2 && c1.len() == c2.len() =>
            {
                let c = c1.iter().zip(c2).map(|(a, b)| alpha * a + beta * b).collect();
                Self::sine_series(*t1, c)
            }
            (Representation::Samples { grid: g1, values: v1 }, Representation::Samples { grid: g2, values: v2 }) if g1 == g2 => {
                let v = v1.iter().zip(v2).map(|(a, b)| alpha * a + beta * b).collect();
                Self::samples(g1.clone(), v)
            }
            (Representation::ClosedForm(f1), Representation::ClosedForm(f2)) if s1.support_end == s2.support_end => {
                let (a, b) = (f1.scaled(alpha), f2.scaled(beta));
                let mut terms = a.terms.clone();
                terms.extend(b.terms.iter().copied());
                let f = ClosedForm::new("sum", vec![], a.offset + b.offset, a.slope + b.slope, terms);
                Ok(Self { repr: Representation::ClosedForm(f), support_end: s1.support_end })
            }
            _ => invalid("linear combination needs matching representations"),
        }
    }

    /// `int_0^t exp(c z) f(z) dz`, exact for every representation.
    ///
    /// Fails with [`Error::Overflow`] when `Re(c) t > 700`.
    pub fn exp_moment(&self, c: Complex64, t: f64) -> Result<Complex64> {
        let t = t.min(self.support_end).max(0.0);
        if c.re * t > EXP_GUARD {
            return Err(Error::Overflow(c.re * t));
        }
        if t == 0.0 {
            return Ok(C0);
        }
        Ok(match &self.repr {
            Representation::ClosedForm(f) => f.exp_moment(c, t),
            Representation::SineSeries { tau, coefficients } => sine_series_exp_moment(*tau, coefficients, c, t),
            Representation::Samples { grid, values } => samples_exp_moment(grid, values, c, t),
        })
    }

    /// `int_0^t exp(-c s) f(t - s) ds = exp(-c t) int_0^t exp(c z) f(z) dz`,
    /// computed without the large intermediate factor when `Re(c) > 0`.
    pub fn damped_moment(&self, c: Complex64, t: f64) -> Result<Complex64> {
        if t <= 0.0 {
            return Ok(C0);
        }
        let te = t.min(self.support_end);
        if -c.re * te > EXP_GUARD {
            return Err(Error::Overflow(-c.re * te));
        }
        let inner = match &self.repr {
            Representation::ClosedForm(f) => f.damped_moment(c, te),
            Representation::SineSeries { tau, coefficients } => sine_series_damped_moment(*tau, coefficients, c, te),
            Representation::Samples { grid, values } => samples_damped_moment(grid, values, c, te),
        };
        if te < t {
            Ok(inner * (-c * (t - te)).exp())
        } else {
            Ok(inner)
        }
    }
}

fn interpolate(nodes: &[f64], values: &[f64], t: f64) -> f64 {
    let n = nodes.len();
    if t >= nodes[n - 1] {
        return values[n - 1];
    }
    let j = nodes.partition_point(|&z| z <= t).max(1) - 1;
    let (z0, z1) = (nodes[j], nodes[j + 1]);
    let u = (t - z0) / (z1 - z0);
    values[j] + u * (values[j + 1] - values[j])
}

fn sine_series_exp_moment(tau: f64, coefficients: &[f64], c: Complex64, t: f64) -> Complex64 {
    let mut s = C0;
    for (n, &cn) in coefficients.iter().enumerate() {
        if cn == 0.0 {
            continue;
        }
        let w = (n + 1) as f64 * std::f64::consts::PI / tau;
        let plus = t * phi1((c + I * w) * t);
        let minus = t * phi1((c - I * w) * t);
        s += cn * (plus - minus) / (2.0 * I);
    }
    s
}

fn sine_series_damped_moment(tau: f64, coefficients: &[f64], c: Complex64, t: f64) -> Complex64 {
    let mut s = C0;
    let step = Complex64::from_polar(1.0, std::f64::consts::PI * t / tau);
    let mut e = Complex64::new(1.0, 0.0);
    for (n, &cn) in coefficients.iter().enumerate() {
        e *= step;
        if cn == 0.0 {
            continue;
        }
        let w = (n + 1) as f64 * std::f64::consts::PI / tau;
        let plus = e * t * psi(0, (c + I * w) * t);
        let minus = e.conj() * t * psi(0, (c - I * w) * t);
        s += cn * (plus - minus) / (2.0 * I);
    }
    s
}

/// Segment pieces of a piecewise-linear signal clipped to `[0, t]`.
fn segments<'a>(grid: &'a TimeGrid, values: &'a [f64], t: f64) -> impl Iterator<Item = (f64, f64, f64, f64)> + 'a {
    let nodes = grid.nodes();
    let last = nodes.partition_point(|&z| z < t).min(nodes.len() - 1);
    (0..last).map(move |j| {
        let (z0, y0) = (nodes[j], values[j]);
        if nodes[j + 1] <= t {
            (z0, nodes[j + 1], y0, values[j + 1])
        } else {
            (z0, t, y0, interpolate(nodes, values, t))
        }
    })
}

fn samples_exp_moment(grid: &TimeGrid, values: &[f64], c: Complex64, t: f64) -> Complex64 {
    let mut s = C0;
    for (z0, z1, y0, y1) in segments(grid, values, t) {
        let h = z1 - z0;
        let [p0, p1, _] = psi3(-c * h);
        s += (c * z0).exp() * h * (y0 * p0 + (y1 - y0) * p1);
    }
    s
}

fn samples_damped_moment(grid: &TimeGrid, values: &[f64], c: Complex64, t: f64) -> Complex64 {
    if let Some(h) = grid.spacing() {
        let full = (t / h + 1e-9).floor() as usize;
        let full = full.min(grid.n_nodes() - 1);
        let tail_start = full as f64 * h;
        let [p0, p1, _] = psi3(c * h);
        let decay = (-c * h).exp();
        // Horner sweep over full segments, oldest first.
        let mut acc = C0;
        for j in 0..full {
            let (y0, y1) = (values[j], values[j + 1]);
            acc = acc * decay + h * (y1 * p0 + (y0 - y1) * p1);
        }
        let rest = t - tail_start;
        if rest > 1e-14 * t.max(1.0) {
            let y0 = values[full];
            let y1 = interpolate(grid.nodes(), values, t);
            let [q0, q1, _] = psi3(c * rest);
            acc = acc * (-c * rest).exp() + rest * (y1 * q0 + (y0 - y1) * q1);
        }
        return acc;
    }
    let mut s = C0;
    for (z0, z1, y0, y1) in segments(grid, values, t) {
        let h = z1 - z0;
        let [p0, p1, _] = psi3(c * h);
        s += (-c * (t - z1)).exp() * h * (y1 * p0 + (y0 - y1) * p1);
    }
    s
}

/// Trapezoid L2 norm of `s` over the nodes of `grid`.
pub fn l2_norm_time(s: &BoundarySignal, grid: &TimeGrid) -> f64 {
    l2_norm_values(&s.sampled(grid), grid)
}

pub fn l2_norm_values(values: &[f64], grid: &TimeGrid) -> f64 {
    grid.trapezoid_weights().iter().zip(values).map(|(w, v)| w * v * v).sum::<f64>().sqrt()
}

/// Real values of one formula on an `n_x x n_t` grid, stored row-major in x.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionField {
    space: SpaceGrid,
    time: TimeGrid,
    values: Vec<f64>,
    formula_tag: String,
}

impl SolutionField {
    pub fn new(space: SpaceGrid, time: TimeGrid, values: Vec<f64>, formula_tag: impl Into<String>) -> Result<Self> {
        if values.len() != space.n_nodes() * time.n_nodes() {
            return invalid("field size does not match its grids");
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            let (ix, it) = (i / time.n_nodes(), i % time.n_nodes());
            return invalid(format!("non-finite field value at x = {}, t = {}", space.nodes()[ix], time.nodes()[it]));
        }
        Ok(Self { space, time, values, formula_tag: formula_tag.into() })
    }

    /// Evaluates `f(x, t)` at every grid point.
    pub fn from_fn(space: &SpaceGrid, time: &TimeGrid, tag: &str, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(space.n_nodes() * time.n_nodes());
        for &x in space.nodes() {
            for &t in time.nodes() {
                values.push(f(x, t));
            }
        }
        Self::new(space.clone(), time.clone(), values, tag)
    }

    pub fn space(&self) -> &SpaceGrid {
        &self.space
    }

    pub fn time(&self) -> &TimeGrid {
        &self.time
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn formula_tag(&self) -> &str {
        &self.formula_tag
    }

    pub fn get(&self, ix: usize, it: usize) -> f64 {
        self.values[ix * self.time.n_nodes() + it]
    }

    /// `||f(., t_j)||_{L2(0, ell)}` by trapezoid in x, one entry per time node.
    pub fn l2_in_x(&self) -> Vec<f64> {
        let w = self.space.trapezoid_weights();
        (0..self.time.n_nodes()).map(|it| w.iter().enumerate().map(|(ix, wx)| wx * self.get(ix, it).powi(2)).sum::<f64>().sqrt()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Contraction factor of a fixed-point map together with its verdict.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    pub contraction_factor: f64,
    pub threshold: f64,
    pub admissible: bool,
    /// `1 / (1 - kappa)`, absent when `kappa >= 1`.
    pub size_bound_multiplier: Option<f64>,
}

impl Certificate {
    pub fn new(kappa: f64, threshold: f64) -> Self {
        Self {
            contraction_factor: kappa,
            threshold,
            admissible: kappa <= threshold,
            size_bound_multiplier: (kappa < 1.0).then(|| 1.0 / (1.0 - kappa)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn simpson_c(f: impl Fn(f64) -> Complex64, a: f64, b: f64, n: usize) -> Complex64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn grid_invariants() {
        let g = TimeGrid::uniform(6.0, 241).unwrap();
        assert_eq!(g.nodes()[0], 0.0);
        assert_eq!(g.t_end(), 6.0);
        assert_eq!(g.spacing(), Some(0.025));
        assert!(TimeGrid::uniform(1.0, 1).is_err());
        assert!(TimeGrid::from_nodes(vec![0.0, 1.0, 1.0]).is_err());
        assert!(TimeGrid::from_nodes(vec![0.1, 1.0]).is_err());
        assert!(SpaceGrid::uniform(-1.0, 3).is_err());
        assert!(SpaceGrid::from_nodes(1.0, vec![0.0, 1.5]).is_err());
    }

    #[test]
    fn eval_examples() {
        let s = BoundarySignal::sine_series(6.0, vec![1.0]).unwrap();
        assert_eq!(s.eval(0.0), 0.0);
        let g = BoundarySignal::sine(1.0, 2.0 * PI / 16.0);
        assert_relative_eq!(g.eval(4.0), 1.0, epsilon = 1e-15);
        let grid = TimeGrid::from_nodes(vec![0.0, 1.0, 2.0]).unwrap();
        let s = BoundarySignal::samples(grid, vec![0.0, 3.0, 5.0]).unwrap();
        assert_eq!(s.eval(2.0), 5.0);
        assert_eq!(s.eval(1.5), 4.0);
        assert_eq!(s.eval(2.5), 0.0);
        assert_eq!(s.eval(-1.0), 0.0);
    }

    #[test]
    fn compatible_samples_vanish_at_zero() {
        let grid = TimeGrid::uniform(1.0, 3).unwrap();
        assert!(BoundarySignal::samples_compatible(grid.clone(), vec![0.1, 0.0, 0.0]).is_err());
        assert!(BoundarySignal::samples_compatible(grid, vec![0.0, 1.0, 0.0]).is_ok());
    }

    #[test]
    fn l2_norm_examples() {
        assert_eq!(l2_norm_time(&BoundarySignal::zero(), &TimeGrid::uniform(1.0, 5).unwrap()), 0.0);
        let grid = TimeGrid::uniform(4.0, 9).unwrap();
        let one = BoundarySignal::samples(grid.clone(), vec![1.0; 9]).unwrap();
        assert_relative_eq!(l2_norm_time(&one, &grid), 2.0, epsilon = 1e-14);
        // Oracle: 64-point Gauss-Legendre of sin^2 on 12 panels, then sqrt;
        // the antiderivative gives sqrt(3 + 2/pi).
        let f = |t: f64| (PI * t / 8.0).sin().powi(2);
        let gl = gauss_quad::legendre::GaussLegendre::new(64.try_into().unwrap());
        let oracle = (0..12).map(|p| gl.integrate(p as f64 * 0.5, (p + 1) as f64 * 0.5, f)).sum::<f64>().sqrt();
        assert_relative_eq!(oracle, 1.906_992_336_735_410_5, epsilon = 1e-13);
        let s = BoundarySignal::sine(1.0, PI / 8.0);
        let fine = TimeGrid::uniform(6.0, 4001).unwrap();
        assert_relative_eq!(l2_norm_time(&s, &fine), 1.906_992_336_735_410_5, epsilon = 1e-6);
    }

    #[test]
    fn l2_norm_second_order() {
        let s = BoundarySignal::sine(1.0, PI / 8.0);
        let exact = 1.906_992_336_735_410_5;
        let e1 = (l2_norm_time(&s, &TimeGrid::uniform(6.0, 21).unwrap()) - exact).abs();
        let e2 = (l2_norm_time(&s, &TimeGrid::uniform(6.0, 41).unwrap()) - exact).abs();
        let order = (e1 / e2).log2();
        assert!((1.8..2.2).contains(&order), "observed order {order}");
    }

    #[test]
    fn windowed_sine_expansion() {
        let w = ClosedForm::windowed_sine(1.3, 50.0 * PI, 0.04, 2);
        for i in 0..50 {
            let t = 0.04 * i as f64 / 49.0;
            let direct = 1.3 * (50.0 * PI * t).sin() * (PI * t / 0.04).sin().powi(4);
            assert!((w.eval(t) - direct).abs() < 1e-13);
        }
    }

    #[test]
    fn derivative_of_closed_form() {
        let f = ClosedForm::new("x", vec![], 0.5, 2.0, vec![TrigTerm { amplitude: 1.5, omega: 3.0, phase: 0.2 }]);
        let d = f.derivative();
        for &t in &[0.0, 0.7, 2.3] {
            let fd = (f.eval(t + 1e-6) - f.eval(t - 1e-6)) / 2e-6;
            assert!((d.eval(t) - fd).abs() < 1e-8);
        }
        let s = BoundarySignal::sine_series(3.0, vec![0.4, -0.2, 0.1]).unwrap();
        let ds = s.derivative().unwrap();
        let jet = s.jet(1.1).unwrap();
        assert!((ds.eval(1.1) - jet[1]).abs() < 1e-13);
    }

    fn check_moments(s: &BoundarySignal, c: Complex64, t: f64, tol: f64) {
        let brute = simpson_c(|z| (c * z).exp() * s.eval(z), 0.0, t, 20000);
        let got = s.exp_moment(c, t).unwrap();
        assert!((got - brute).norm() < tol, "exp moment {got} vs {brute}");
        let damped = s.damped_moment(c, t).unwrap();
        let expect = (-c * t).exp() * brute;
        assert!((damped - expect).norm() < tol, "damped {damped} vs {expect}");
    }

    #[test]
    fn transform_of_constant_samples() {
        let grid = TimeGrid::uniform(1.0, 2).unwrap();
        let one = BoundarySignal::samples(grid, vec![1.0, 1.0]).unwrap();
        let v = one.exp_moment(Complex64::new(-1.0, 0.0), 1.0).unwrap();
        assert_relative_eq!(v.re, 1.0 - (-1.0f64).exp(), epsilon = 1e-15);
        assert!(v.im.abs() < 1e-16);
    }

    #[test]
    fn moments_against_simpson() {
        let c = Complex64::new(-0.8, 1.7);
        check_moments(&BoundarySignal::sine(1.0, PI / 8.0), c, 3.0, 1e-10);
        check_moments(&BoundarySignal::closed_form(ClosedForm::affine(0.3, -0.4)), c, 2.0, 1e-10);
        check_moments(&BoundarySignal::windowed_sine(1.0, 5.0, 1.5, 2).unwrap(), c, 2.0, 1e-10);
        let ss = BoundarySignal::sine_series(2.5, vec![0.3, -0.1, 0.05, 0.2]).unwrap();
        check_moments(&ss, c, 1.7, 1e-10);
        check_moments(&ss, Complex64::new(0.4, -3.0), 2.5, 1e-10);
        let grid = TimeGrid::uniform(2.0, 11).unwrap();
        let sm = BoundarySignal::samples(grid.clone(), grid.nodes().iter().map(|t| t * (2.0 - t)).collect()).unwrap();
        check_moments(&sm, c, 1.33, 1e-9);
        check_moments(&sm, c, 2.0, 1e-9);
        let nonuni = TimeGrid::from_nodes(vec![0.0, 0.3, 0.5, 1.2, 2.0]).unwrap();
        let sm = BoundarySignal::samples(nonuni, vec![0.0, 1.0, -0.5, 0.7, 0.2]).unwrap();
        check_moments(&sm, c, 1.6, 1e-9);
    }

    #[test]
    fn damped_moment_beyond_support() {
        let ss = BoundarySignal::sine_series(1.0, vec![1.0]).unwrap();
        let c = Complex64::new(0.5, 0.5);
        let inside = ss.damped_moment(c, 1.0).unwrap();
        let beyond = ss.damped_moment(c, 1.6).unwrap();
        assert!((beyond - inside * (-c * 0.6).exp()).norm() < 1e-15);
    }

    #[test]
    fn overflow_guard() {
        let s = BoundarySignal::sine(1.0, 1.0);
        assert!(matches!(s.exp_moment(Complex64::new(800.0, 0.0), 1.0), Err(Error::Overflow(_))));
    }

    #[test]
    fn certificate_multiplier() {
        let c = Certificate::new(0.2, 0.5);
        assert!(c.admissible);
        assert_relative_eq!(c.size_bound_multiplier.unwrap(), 1.25);
        let c = Certificate::new(1.5, 0.5);
        assert!(!c.admissible);
        assert!(c.size_bound_multiplier.is_none());
    }

    proptest! {
        #[test]
        fn sine_series_is_linear(
            c1 in prop::collection::vec(-2.0f64..2.0, 5),
            c2 in prop::collection::vec(-2.0f64..2.0, 5),
            alpha in -3.0f64..3.0,
            beta in -3.0f64..3.0,
            t in 0.0f64..6.0,
        ) {
            let s1 = BoundarySignal::sine_series(6.0, c1).unwrap();
            let s2 = BoundarySignal::sine_series(6.0, c2).unwrap();
            let s = BoundarySignal::linear_combination(alpha, &s1, beta, &s2).unwrap();
            let lhs = s.eval(t);
            let rhs = alpha * s1.eval(t) + beta * s2.eval(t);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
        }

        #[test]
        fn sine_series_vanishes_at_zero(c in prop::collection::vec(-5.0f64..5.0, 1..20), tau in 0.1f64..50.0) {
            prop_assert_eq!(BoundarySignal::sine_series(tau, c).unwrap().eval(0.0), 0.0);
        }

        #[test]
        fn zero_outside_support(c in prop::collection::vec(-5.0f64..5.0, 1..8), tau in 0.1f64..10.0, dt in 1e-9f64..10.0) {
            prop_assert_eq!(BoundarySignal::sine_series(tau, c).unwrap().eval(tau + dt), 0.0);
        }

        #[test]
        fn l2_norm_nonnegative(v in prop::collection::vec(-5.0f64..5.0, 2..30)) {
            let grid = TimeGrid::uniform(3.0, v.len()).unwrap();
            let s = BoundarySignal::samples(grid.clone(), v).unwrap();
            prop_assert!(l2_norm_time(&s, &grid) >= 0.0);
        }

        #[test]
        fn sine_series_transform_matches_quadrature(
            c in prop::collection::vec(-1.0f64..1.0, 1..6),
            kr in -3.0f64..0.5,
            ki in -3.0f64..3.0,
            t in 0.05f64..4.0,
        ) {
            let s = BoundarySignal::sine_series(4.0, c).unwrap();
            let k2 = Complex64::new(kr, ki);
            let brute = simpson_c(|z| (k2 * z).exp() * s.eval(z), 0.0, t, 4000);
            let got = s.exp_moment(k2, t).unwrap();
            prop_assert!((got - brute).norm() <= 1e-10 * (1.0 + brute.norm()));
        }
    }
}
