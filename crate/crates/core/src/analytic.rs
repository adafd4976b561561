//! Closed-form quantities and bounds on the stretch/length tradeoff.
//!
//! Everything here is generic over the scalar type; the acceptance numbers are
//! produced in `f64`.

use crate::error::{Error, Result};
use crate::quad::{integrate, integrate_2d, QuadOptions};
use crate::scalar::Scalar;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

// ln(1e14): exponential factors are truncated below 1e-14 of their peak.
const TAIL: f64 = 32.236_191_301_916_64;

fn int_param<T: Scalar>(n: u32) -> T {
    T::lit(f64::from(n))
}

/// Stretch bound for the θ_m graph, `m >= 6`.
pub fn s_m_bound<T: Scalar>(m: u32) -> Result<T> {
    if m < 6 {
        return Err(Error::Domain(format!("s_m needs m >= 6, got {m}")));
    }
    let th = T::lit(2.0) * T::pi() / int_param(m);
    let half = th / T::lit(2.0);
    let one = T::one();
    Ok(match m % 4 {
        0 => one + T::lit(2.0) * half.sin() / (half.cos() - half.sin()),
        2 => one + T::lit(2.0) * half.sin(),
        _ => (th / T::lit(4.0)).cos() / (half.cos() - (T::lit(3.0) * th / T::lit(4.0)).sin()),
    })
}

/// `α = cos(θ/2) / (4 sin(θ/2))` with `θ = 2π/m`: the triangle-area factor.
pub fn theta_alpha<T: Scalar>(m: u32) -> T {
    let half = T::pi() / int_param(m);
    half.cos() / (T::lit(4.0) * half.sin())
}

fn check_even_m(m: u32) -> Result<()> {
    if m < 6 {
        return Err(Error::Domain(format!("L_m needs m >= 6, got {m}")));
    }
    if m % 2 == 1 {
        return Err(Error::Unsupported(format!("L_m is only evaluated for even m, got {m}")));
    }
    Ok(())
}

// ½ p_mut + p_not as a function of the (r, ℓ) cone coordinates.
fn edge_weight<T: Scalar>(alpha: T, l: T, r: T) -> T {
    let half = T::lit(0.5);
    let lr = l - r;
    (-alpha * l * l).exp() - half * (-alpha * (l * l + r * r + lr * lr)).exp()
}

/// Mean length per unit area of the θ_m graph on the rate-1 Poisson process
/// (even `m >= 6`), integrated in the `(r, ℓ)` coordinates.
///
/// With the bisector horizontal, `ℓ` is the cone's vertical extent at `z` and
/// `r` the distance from `z` up from the lower boundary, so
/// `z = (ℓ / (2 tan(θ/2)), r − ℓ/2)` and `dz = dℓ dr / (2 tan(θ/2))`.
pub fn theta_mean_length<T: Scalar>(m: u32) -> Result<T> {
    theta_mean_length_tol(m, T::lit(1e-6))
}

pub fn theta_mean_length_tol<T: Scalar>(m: u32, tol: T) -> Result<T> {
    check_even_m(m)?;
    let alpha = theta_alpha::<T>(m);
    let jac = T::one() / (T::lit(2.0) * (T::pi() / int_param(m)).tan());
    let l_max = (T::lit(TAIL) / alpha).sqrt();
    let mm = int_param::<T>(m);
    let half = T::lit(0.5);
    let r = integrate_2d(
        |l, r| {
            let x = l * jac;
            let y = r - l * half;
            mm * jac * x.hypot(y) * edge_weight(alpha, l, r)
        },
        T::zero(),
        l_max,
        |_| T::zero(),
        |l| l,
        QuadOptions::abs(tol),
    )?;
    Ok(r.value)
}

/// The same quantity integrated directly over the Cartesian cone
/// `{0 < x, |y| < x tan(θ/2)}`.
pub fn theta_mean_length_cartesian<T: Scalar>(m: u32, tol: T) -> Result<T> {
    check_even_m(m)?;
    let alpha = theta_alpha::<T>(m);
    let t = (T::pi() / int_param(m)).tan();
    let x_max = (T::lit(TAIL) / alpha).sqrt() / (T::lit(2.0) * t);
    let mm = int_param::<T>(m);
    let r = integrate_2d(
        |x, y| {
            let l = T::lit(2.0) * x * t;
            let r = y + x * t;
            mm * x.hypot(y) * edge_weight(alpha, l, r)
        },
        T::zero(),
        x_max,
        |x| -x * t,
        |x| x * t,
        QuadOptions::abs(tol),
    )?;
    Ok(r.value)
}

fn check_k(k: u32) -> Result<()> {
    if k < 2 {
        return Err(Error::Domain(format!("cone roads need k >= 2, got {k}")));
    }
    Ok(())
}

// Exponent of the mutual-nearest probability p₁ divided by r².
fn cone_q<T: Scalar>(k: u32, w: T) -> T {
    let a = T::pi() / int_param(k);
    // cot(π/2) is zero; avoid the rounding residue of cos(π/2)
    let cot = if k == 2 { T::zero() } else { a.cos() / a.sin() };
    a - w.cos() * w.sin() + w.sin() * w.sin() * cot
}

/// Normalized length `L_k` of one cone-road direction network `N_i`.
pub fn cone_lk<T: Scalar>(k: u32) -> Result<T> {
    cone_lk_tol(k, T::lit(1e-8))
}

pub fn cone_lk_tol<T: Scalar>(k: u32, tol: T) -> Result<T> {
    check_k(k)?;
    let kk = int_param::<T>(k);
    let r = integrate(
        |w| cone_q(k, w).powf(T::lit(-1.5)),
        T::zero(),
        T::pi() / kk,
        QuadOptions::abs(tol),
    )?;
    Ok((T::lit(2.0) * kk).sqrt() - T::pi().sqrt() / T::lit(4.0) * r.value)
}

/// `L_k` from the un-integrated form `∫∫ r² (2p − p₁) dω dr` with
/// `p = exp(−π r² / 2k)` and `p₁ = exp(−r² Q(ω))`.
pub fn cone_lk_polar<T: Scalar>(k: u32, tol: T) -> Result<T> {
    check_k(k)?;
    let kk = int_param::<T>(k);
    let a = T::pi() / kk;
    let q_min = a - (T::one() - a.cos()) / (T::lit(2.0) * a.sin());
    let decay = q_min.min(a / T::lit(2.0));
    let r_max = (T::lit(TAIL) / decay).sqrt();
    let res = integrate_2d(
        |r, w| {
            let r2 = r * r;
            r2 * (T::lit(2.0) * (-a / T::lit(2.0) * r2).exp() - (-r2 * cone_q(k, w)).exp())
        },
        T::zero(),
        r_max,
        |_| T::zero(),
        |_| a,
        QuadOptions::abs(tol),
    )?;
    Ok(res.value)
}

/// Upper bound Ψ*(s) on worst-case normalized length from the line-pattern
/// construction, for `1 < s < 2`.
pub fn psi_star<T: Scalar>(s: T) -> Result<T> {
    if !(s > T::one() && s < T::lit(2.0)) {
        return Err(Error::Domain(format!("psi_star needs s in the open interval (1, 2), got {s}")));
    }
    let phi = T::pi() / T::lit(2.0) - (T::one() / s).asin();
    let n_dir = (T::pi() / phi).ceil();
    let n_par = T::one() + (T::one() / (s - T::one())).ceil();
    Ok(T::lit(2.0) * n_dir * (n_par * phi.tan()).sqrt() / phi.sin())
}

/// `g(δ) = (√(1+(1+δ)²) + √(1+(1−δ)²)) / (2√2) − 1`, evaluated without
/// cancellation for small δ.
pub fn g_of_delta<T: Scalar>(delta: T) -> T {
    let one = T::one();
    let r2 = T::lit(2.0).sqrt();
    let d2 = delta * delta;
    let s1 = (one + (one + delta) * (one + delta)).sqrt();
    let s2 = (one + (one - delta) * (one - delta)).sqrt();
    let a = -T::lit(8.0) * d2 / ((s1 + s2) * (s1 + r2) * (s2 + r2));
    let b = d2 * (one / (s1 + r2) + one / (s2 + r2));
    (a + b) / (T::lit(2.0) * r2)
}

const G_BRACKET: f64 = 64.0;

/// Inverse of [`g_of_delta`] by bisection on `[0, 64]`.
pub fn g_inverse<T: Scalar>(s: T) -> Result<T> {
    let hi_val = g_of_delta(T::lit(G_BRACKET));
    if !(s >= T::zero() && s <= hi_val) {
        return Err(Error::Domain(format!("g_inverse needs 0 <= s <= {hi_val}, got {s}")));
    }
    let (mut lo, mut hi) = (T::zero(), T::lit(G_BRACKET));
    for _ in 0..200 {
        let mid = (lo + hi) / T::lit(2.0);
        if mid <= lo || mid >= hi || hi - lo <= T::lit(1e-15) {
            break;
        }
        if g_of_delta(mid) < s {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) / T::lit(2.0))
}

/// Largest gap between a route crossing and the virtual crossing of friends
/// in a strip of half-height `h`, for a network of stretch `1 + s`.
pub fn delta_hs<T: Scalar>(h: T, s: T) -> Result<T> {
    if !(h > T::zero() && s > T::zero()) {
        return Err(Error::Domain(format!("delta_hs needs h > 0 and s > 0, got h = {h}, s = {s}")));
    }
    Ok(h * g_inverse(s)?)
}

/// Mean number of virtual crossings in `[0, L]`: `2 h³ L`.
pub fn expected_crossings<T: Scalar>(h: T, l: T) -> T {
    T::lit(2.0) * h * h * h * l
}

/// Area of the set of friends of `(x0, −y0)` whose virtual crossing lies in
/// `[0, L]`.
pub fn area_a<T: Scalar>(x0: T, y0: T, h: T, l: T) -> Result<T> {
    if !(h > l / T::lit(2.0) && l > T::zero()) {
        return Err(Error::Domain(format!("area_a needs h > L/2 > 0, got h = {h}, L = {l}")));
    }
    if !(y0 > T::zero() && y0 < h && x0 > -y0 && x0 < l + y0) {
        return Err(Error::Domain(format!("point ({x0}, -{y0}) is outside the region B")));
    }
    let band = (h + y0) * (h + y0) - y0 * y0;
    let half = T::lit(0.5);
    // mirror the left wedge onto the right one
    let x = if x0 < l - x0 { l - x0 } else { x0 };
    if x < l - y0 {
        Ok(band)
    } else if x < y0 {
        Ok(l / (T::lit(2.0) * y0) * band)
    } else {
        Ok(half * (T::one() + (l - x) / y0) * band)
    }
}

/// Closed-form upper bound on `E N²(h, L)`, valid for `h > L/2`.
pub fn second_moment_upper<T: Scalar>(h: T, l: T) -> Result<T> {
    if !(l > T::zero() && h > l / T::lit(2.0)) {
        return Err(Error::Domain(format!("second_moment_upper needs h > L/2 > 0, got h = {h}, L = {l}")));
    }
    let en = expected_crossings(h, l);
    let (h2, l2) = (h * h, l * l);
    let (h3, l3) = (h2 * h, l2 * l);
    let (h4, l4) = (h2 * h2, l2 * l2);
    let lo = T::lit(0.75) * h4 * l2 + T::lit(5.0 / 6.0) * h3 * l3 + T::lit(7.0 / 24.0) * h2 * l4;
    let hi = T::lit(3.5) * h4 * l2 - T::lit(0.25) * h3 * l3 - T::lit(0.75) * h2 * l4
        + (T::lit(0.5) * l2 * h4 + l3 * h3) * (T::lit(2.0) * h / l).ln();
    Ok(en + en * en + lo + hi)
}

/// The bounded integrand `(L + 2y)((h+y)² − y²)² min(1, L/2y)²` whose integral
/// over `(0, h)` the closed forms in [`second_moment_upper`] evaluate.
pub fn second_moment_integrand<T: Scalar>(y: T, h: T, l: T) -> T {
    let band = (h + y) * (h + y) - y * y;
    let c = T::one().min(l / (T::lit(2.0) * y));
    (l + T::lit(2.0) * y) * band * band * c * c
}

/// `E N²(h, L)` by quadrature, counting ordered pairs of crossings.
///
/// Two crossings sharing the end point `z` contribute `A(z)²` ordered pairs,
/// with `z` on either side of the axis, so the shared-point term is
/// `2 ∫∫ A²`. This is twice the integral term of the closed form behind
/// [`second_moment_upper`], which therefore falls below the true second
/// moment at moderate `h`.
pub fn second_moment_exact<T: Scalar>(h: T, l: T, tol: T) -> Result<T> {
    if !(h > T::zero() && l > T::zero() && h.is_finite() && l.is_finite()) {
        return Err(Error::Domain(format!("second_moment_exact needs h, L > 0, got h = {h}, L = {l}")));
    }
    let two = T::lit(2.0);
    // A(x0, -y0) = w(x0) ((h+y0)² − y0²) / 2, with w piecewise linear in x0
    let slice = |y0: T| -> T {
        if y0 <= T::zero() {
            return T::zero();
        }
        let band = (h + y0) * (h + y0) - y0 * y0;
        let w = |x0: T| {
            let lo = (-T::one()).max(-x0 / y0);
            let hi = T::one().min((l - x0) / y0);
            (hi - lo).max(T::zero())
        };
        let mut knots = [-y0, y0, l - y0, l + y0];
        knots.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut sum = T::zero();
        for k in 0..3 {
            // w² is quadratic between knots, so one Kronrod rule is exact
            if let Ok(r) = integrate(|x| w(x) * w(x), knots[k], knots[k + 1], QuadOptions::abs(T::infinity())) {
                sum = sum + r.value;
            }
        }
        sum * band * band / T::lit(4.0)
    };
    let opts = QuadOptions::abs(tol).with_rel(tol);
    let mut term = T::zero();
    let split = (l / two).min(h);
    for (a, b) in [(T::zero(), split), (split, h)] {
        if b > a {
            term = term + integrate(slice, a, b, opts)?.value;
        }
    }
    let en = expected_crossings(h, l);
    Ok(en + en * en + two * term)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prop38<T> {
    pub value: T,
    pub h: T,
    pub l: T,
    /// Objective at `h = s^{-1/8}`, `L = s^{3/8}`.
    pub schedule_value: T,
}

/// `(π/2) · (E N)² / E N²_upper / (L + 2 δ(h, s))` at one `(h, L)`; `None`
/// where `h <= L/2`.
pub fn prop38_objective<T: Scalar>(s: T, h: T, l: T) -> Result<Option<T>> {
    let d = g_inverse(s)?;
    Ok(objective(d, h, l))
}

fn objective<T: Scalar>(ginv: T, h: T, l: T) -> Option<T> {
    let m2 = second_moment_upper(h, l).ok()?;
    let en = expected_crossings(h, l);
    Some(T::pi() / T::lit(2.0) * en * en / m2 / (l + T::lit(2.0) * h * ginv))
}

const GRID: usize = 64;

/// Lower bound on `Ψ_ave(1 + s)` for `0 < s < 0.1`: maximizes the
/// second-moment objective over a log grid in `(h, L)` and refines the best
/// cell by pattern search.
pub fn prop38_lower_bound<T: Scalar>(s: T) -> Result<Prop38<T>> {
    if !(s > T::zero() && s < T::lit(0.1)) {
        return Err(Error::Domain(format!("prop38_lower_bound needs 0 < s < 0.1, got {s}")));
    }
    let ginv = g_inverse(s)?;
    let ls = s.ln();
    // (log h, log L) box
    let (h_lo, h_hi) = (-ls / T::lit(16.0), -ls / T::lit(4.0));
    let (l_lo, l_hi) = (ls / T::lit(2.0), ls / T::lit(4.0));
    let at = |i: usize, lo: T, hi: T| lo + (hi - lo) * T::from_usize_lossy(i) / T::from_usize_lossy(GRID - 1);
    let f = |lh: T, ll: T| objective(ginv, lh.exp(), ll.exp());

    let sched = (-ls / T::lit(8.0), T::lit(3.0) * ls / T::lit(8.0));
    let schedule_value = f(sched.0, sched.1)
        .ok_or_else(|| Error::Domain("schedule point violates h > L/2".into()))?;

    let best_cell = (0..GRID * GRID)
        .into_par_iter()
        .filter_map(|c| {
            let (lh, ll) = (at(c / GRID, h_lo, h_hi), at(c % GRID, l_lo, l_hi));
            f(lh, ll).map(|v| (v, lh, ll))
        })
        .reduce_with(|a, b| if b.0 > a.0 { b } else { a });
    let mut best = (schedule_value, sched.0, sched.1);
    if let Some(c) = best_cell {
        if c.0 > best.0 {
            best = c;
        }
    }

    let mut step = (h_hi - h_lo).max(l_lo - l_hi) / T::from_usize_lossy(GRID - 1);
    let tiny = T::lit(1e-9);
    while step > tiny {
        let mut moved = false;
        for (dh, dl) in [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1), (1, -1), (-1, 1)] {
            let lh = (best.1 + step * T::lit(dh as f64)).max(h_lo).min(h_hi);
            let ll = (best.2 + step * T::lit(dl as f64)).max(l_lo).min(l_hi);
            if let Some(v) = f(lh, ll) {
                if v > best.0 {
                    best = (v, lh, ll);
                    moved = true;
                }
            }
        }
        if !moved {
            step = step / T::lit(2.0);
        }
    }
    Ok(Prop38 {
        value: best.0,
        h: best.1.exp(),
        l: best.2.exp(),
        schedule_value,
    })
}

/// One row of a bounds table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundEntry {
    pub name: String,
    pub param: String,
    pub value: f64,
    pub paper_tag: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundTable {
    pub entries: Vec<BoundEntry>,
}

pub const BOUNDS_SCHEMA_VERSION: u32 = 1;

impl BoundTable {
    pub fn push(&mut self, name: &str, param: impl Into<String>, value: f64, tag: &str) {
        self.entries.push(BoundEntry {
            name: name.into(),
            param: param.into(),
            value,
            paper_tag: tag.into(),
        });
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.name == name).map(|e| e.value)
    }

    /// CSV with header `name,param,value,paper_tag,schema_version`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("name,param,value,paper_tag,schema_version\n");
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                csv_field(&e.name),
                csv_field(&e.param),
                e.value,
                csv_field(&e.paper_tag),
                BOUNDS_SCHEMA_VERSION
            );
        }
        out
    }
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Fixed constants quoted alongside the computed bounds.
pub fn reference_constants() -> BoundTable {
    use std::f64::consts::PI;
    let mut t = BoundTable::default();
    t.push("c_worst_lower", "", 0.75f64.powf(0.25), "sec3");
    t.push("c_worst_upper", "", 0.995, "sec3");
    t.push("delaunay_stretch", "", 2.0 * PI / (3.0 * (PI / 6.0).cos()), "sec1.1");
    t.push("delaunay_length", "", 32.0 / (3.0 * PI), "C2");
    t.push("worst_exponent_spanner", "", 4.0, "C1");
    t.push("worst_exponent_line_pattern", "", 1.25, "54bound");
    t.push("ave_exponent_theta", "", 1.5, "s32");
    t.push("ave_cone_prefactor", "", 2f64.powf(-0.25) * PI.powf(1.5), "C34");
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn s_m_cases() {
        assert_relative_eq!(s_m_bound::<f64>(6).unwrap(), 2.0, epsilon = 1e-15);
        let a = std::f64::consts::PI / 8.0;
        assert_relative_eq!(s_m_bound::<f64>(8).unwrap(), 1.0 + 2.0 * a.sin() / (a.cos() - a.sin()), epsilon = 1e-15);
        assert!(s_m_bound::<f64>(5).is_err());
        assert!(s_m_bound::<f64>(7).unwrap().is_finite());
    }

    #[test]
    fn s_m_decreases_within_residue_class() {
        for r in 0..4 {
            let ms: Vec<u32> = (6..200).filter(|m| m % 4 == r).collect();
            for w in ms.windows(2) {
                let a: f64 = s_m_bound(w[0]).unwrap();
                let b: f64 = s_m_bound(w[1]).unwrap();
                assert!(b < a, "m = {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn s_m_excess_is_order_one_over_m() {
        let vals: Vec<f64> = (6..=200).map(|m| m as f64 * (s_m_bound::<f64>(m).unwrap() - 1.0)).collect();
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(0.0, f64::max);
        assert!(lo > 4.0 && hi < 20.0, "{lo} {hi}");
    }

    #[test]
    fn lm_matches_reference_values() {
        // independent high-precision evaluation of the cone integral
        let refs = [(6, 5.642_076_473_677_231), (8, 8.662_467_890_598_655), (10, 12.095_811_107_131_848)];
        for (m, v) in refs {
            let got: f64 = theta_mean_length(m).unwrap();
            assert!((got - v).abs() < 2e-6, "m = {m}: {got}");
        }
    }

    #[test]
    fn lm_two_parametrizations_agree() {
        for m in [6, 12, 20] {
            let a: f64 = theta_mean_length_tol(m, 1e-8).unwrap();
            let b: f64 = theta_mean_length_cartesian(m, 1e-8).unwrap();
            assert!(((a - b) / a).abs() < 1e-5, "m = {m}: {a} vs {b}");
        }
    }

    #[test]
    fn lm_rejects_odd_and_small() {
        assert!(matches!(theta_mean_length::<f64>(7), Err(Error::Unsupported(_))));
        assert!(matches!(theta_mean_length::<f64>(4), Err(Error::Domain(_))));
    }

    #[test]
    fn lm_tolerance_halving_is_stable() {
        let a: f64 = theta_mean_length_tol(8, 1e-6).unwrap();
        let b: f64 = theta_mean_length_tol(8, 5e-7).unwrap();
        assert!(((a - b) / a).abs() < 1e-5);
        assert!((a - b).abs() < 1e-6);
    }

    #[test]
    fn lk_matches_reference_values() {
        let refs = [
            (2, 1.489_904_089_335_955_1),
            (3, 1.855_236_751_733_575_2),
            (4, 2.151_485_720_810_520_6),
            (8, 3.053_768_990_114_249_3),
            (64, 8.646_893_418_509_385),
        ];
        for (k, v) in refs {
            let got: f64 = cone_lk(k).unwrap();
            assert!((got - v).abs() < 1e-8, "k = {k}: {got}");
        }
    }

    #[test]
    fn lk_polar_form_agrees() {
        for k in [2, 3, 4, 8, 16] {
            let a: f64 = cone_lk(k).unwrap();
            let b: f64 = cone_lk_polar(k, 1e-8).unwrap();
            assert!(((a - b) / a).abs() < 1e-5, "k = {k}: {a} vs {b}");
        }
    }

    #[test]
    fn lk_f32_close_to_f64() {
        let a: f32 = cone_lk_tol(4, 1e-5).unwrap();
        assert!((f64::from(a) - 2.151_485_720_810_520_6).abs() < 1e-4);
    }

    #[test]
    fn psi_star_domain_and_value() {
        assert!(psi_star(2.5f64).is_err());
        assert!(psi_star(1.0f64).is_err());
        let msg = psi_star(2.0f64).unwrap_err().to_string();
        assert!(msg.contains("(1, 2)"), "{msg}");
        // independent 50-digit evaluation
        assert_relative_eq!(psi_star(1.5f64).unwrap(), 19.656_870_211_505_28, max_relative = 1e-14);
    }

    #[test]
    fn psi_star_jumps_at_ceilings() {
        // 1/(s-1) crosses 10 at s = 1.1
        let below: f64 = psi_star(1.1 - 1e-9).unwrap();
        let above: f64 = psi_star(1.1 + 1e-9).unwrap();
        assert!((below / above - (12.0f64 / 11.0).sqrt()).abs() < 1e-6);
    }

    #[test]
    fn g_small_delta_and_round_trip() {
        assert_eq!(g_of_delta(0.0f64), 0.0);
        for d in [1e-3f64, 1e-4] {
            assert!((g_of_delta(d) / (d * d) - 0.125).abs() < 1e-3);
        }
        for s in [1e-6f64, 1e-3, 0.1] {
            assert!((g_of_delta(g_inverse(s).unwrap()) - s).abs() < 1e-10);
        }
        let naive = |d: f64| ((1.0 + (1.0 + d).powi(2)).sqrt() + (1.0 + (1.0 - d).powi(2)).sqrt()) / (2.0 * 2f64.sqrt()) - 1.0;
        assert_relative_eq!(g_of_delta(0.7), naive(0.7), max_relative = 1e-14);
    }

    #[test]
    fn delta_hs_properties() {
        let s = 0.01f64;
        assert_relative_eq!(delta_hs(2.0, s).unwrap(), 2.0 * delta_hs(1.0, s).unwrap(), max_relative = 1e-14);
        let small = 1e-8f64;
        assert_relative_eq!(delta_hs(3.0, small).unwrap(), 3.0 * (8.0 * small).sqrt(), max_relative = 1e-3);
        assert!((delta_hs(1.0, g_of_delta(0.5f64)).unwrap() - 0.5).abs() < 1e-10);
        assert!(delta_hs(0.0f64, s).is_err());
    }

    #[test]
    fn crossings_mean() {
        assert_eq!(expected_crossings(1.0f64, 1.0), 2.0);
        assert_eq!(expected_crossings(0.0f64, 1.0), 0.0);
    }

    #[test]
    fn area_a_regions_and_seams() {
        let (h, l) = (13.0f64, 10.0);
        let band = |y: f64| (h + y).powi(2) - y * y;
        assert_relative_eq!(area_a(5.0, 2.0, h, l).unwrap(), band(2.0));
        assert_relative_eq!(area_a(5.0, 8.0, h, l).unwrap(), l / 16.0 * band(8.0));
        assert_relative_eq!(area_a(8.0, 5.0, h, l).unwrap(), 0.5 * (1.0 + 2.0 / 5.0) * band(5.0));
        assert_relative_eq!(area_a(2.0, 5.0, h, l).unwrap(), area_a(8.0, 5.0, h, l).unwrap());
        // seam between B0 and the right wedge at x0 = L - y0
        let y = 3.0;
        let e = 1e-9;
        assert!((area_a(l - y - e, y, h, l).unwrap() - area_a(l - y + e, y, h, l).unwrap()).abs() < 1e-6);
        assert!(area_a(-3.0, 2.0, h, l).is_err());
        assert!(area_a(5.0, 14.0, h, l).is_err());
    }

    #[test]
    fn area_a_never_exceeds_its_bound() {
        let (h, l) = (2.0f64, 1.0);
        for i in 1..40 {
            let y = h * i as f64 / 40.0;
            for j in 1..40 {
                let x = -y + (l + 2.0 * y) * j as f64 / 40.0;
                let a = area_a(x, y, h, l).unwrap();
                let bound = ((h + y).powi(2) - y * y) * (l / (2.0 * y)).min(1.0);
                assert!(a <= bound * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn second_moment_closed_forms_match_quadrature() {
        for (h, l) in [(1.0f64, 0.5), (3.0, 1.0), (10.0, 0.01)] {
            let q = |a: f64, b: f64| integrate(|y| second_moment_integrand(y, h, l), a, b, QuadOptions::abs(1e-10).with_rel(1e-12)).unwrap().value;
            let total = q(0.0, l / 2.0) + q(l / 2.0, h);
            let en = expected_crossings(h, l);
            let closed = second_moment_upper(h, l).unwrap() - en - en * en;
            assert_relative_eq!(closed, total, max_relative = 1e-9);
        }
        let lo = 0.75 * 0.25 + 5.0 / 6.0 * 0.125 + 7.0 / 24.0 / 16.0;
        let q = integrate(|y| second_moment_integrand(y, 1.0f64, 0.5), 0.0, 0.25, QuadOptions::abs(1e-13)).unwrap().value;
        assert_relative_eq!(q, lo, max_relative = 1e-12);
        assert!(second_moment_upper(1.0f64, 2.0).is_err());
    }

    #[test]
    fn exact_second_moment_oracle() {
        // 30-digit quadrature split at the kinks of A
        for (h, l, want) in [(1.0, 1.0, 11.09216017129776), (4.0, 1.0, 18510.725306669476), (1.0, 0.25, 1.2379700455736026)] {
            let v: f64 = second_moment_exact(h, l, 1e-10).unwrap();
            assert!((v - want).abs() < 1e-8 * want, "{h} {l}: {v}");
        }
        let upper: f64 = second_moment_upper(1.0, 0.25).unwrap();
        assert!(second_moment_exact(1.0f64, 0.25, 1e-10).unwrap() > upper);
        assert!(second_moment_exact(0.0f64, 1.0, 1e-10).is_err());
    }

    #[test]
    fn second_moment_limit_regime() {
        let lambda = 1.0f64;
        for j in 2..=5 {
            let h = 10f64.powi(j);
            let l = lambda / (2.0 * h.powi(3));
            let v = second_moment_upper(h, l).unwrap();
            let target = lambda * lambda + lambda;
            assert!((v - target).abs() / target < 0.01, "h = {h}: {v}");
        }
    }

    #[test]
    fn prop38_scales_like_s_to_minus_three_eighths() {
        let vals: Vec<f64> = [1e-4, 1e-3, 1e-2]
            .iter()
            .map(|&s: &f64| prop38_lower_bound(s).unwrap().value * s.powf(0.375))
            .collect();
        let hi = vals.iter().cloned().fold(0.0, f64::max);
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(hi / lo < 3.0, "{vals:?}");
    }

    #[test]
    fn prop38_beats_schedule_and_stays_in_box() {
        let s = 1e-3f64;
        let r = prop38_lower_bound(s).unwrap();
        assert!(r.value >= r.schedule_value);
        assert!(r.h >= s.powf(-1.0 / 16.0) * (1.0 - 1e-12) && r.h <= s.powf(-0.25) * (1.0 + 1e-12));
        assert!(r.l >= s.powf(0.5) * (1.0 - 1e-12) && r.l <= s.powf(0.25) * (1.0 + 1e-12));
        let at = prop38_objective(s, r.h, r.l).unwrap().unwrap();
        assert_relative_eq!(at, r.value, max_relative = 1e-12);
        assert!(prop38_lower_bound(0.2f64).is_err());
    }

    #[test]
    fn reference_table() {
        let t = reference_constants();
        assert!((t.get("delaunay_length").unwrap() - 3.3953).abs() < 1e-4);
        assert!((t.get("delaunay_stretch").unwrap() - 2.4184).abs() < 1e-4);
        assert!((t.get("c_worst_lower").unwrap() - 0.9306).abs() < 1e-4);
        let csv = t.to_csv();
        assert!(csv.starts_with("name,param,value,paper_tag"));
        assert!(csv.contains("3.3953"));
    }
}
