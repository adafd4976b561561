//! Globally adaptive Gauss–Kronrod (7/15) quadrature.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Tolerances and work limit for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions<T> {
    pub abs_tol: T,
    pub rel_tol: T,
    pub max_intervals: usize,
}

impl<T: Scalar> QuadOptions<T> {
    pub fn abs(tol: T) -> Self {
        Self {
            abs_tol: tol,
            rel_tol: T::zero(),
            max_intervals: 4000,
        }
    }

    pub fn with_rel(mut self, rel: T) -> Self {
        self.rel_tol = rel;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult<T> {
    pub value: T,
    pub error: T,
    pub evals: usize,
}

#[derive(Clone, Copy)]
struct Piece<T> {
    a: T,
    b: T,
    value: T,
    error: T,
}

fn kronrod<T: Scalar>(f: &mut impl FnMut(T) -> T, a: T, b: T) -> Piece<T> {
    let half = T::lit(0.5);
    let c = (a + b) * half;
    let h = (b - a) * half;
    let fc = f(c);
    let mut k = fc * T::lit(WGK[7]);
    let mut g = fc * T::lit(WG[3]);
    for j in 0..7 {
        let dx = h * T::lit(XGK[j]);
        let s = f(c - dx) + f(c + dx);
        k = k + s * T::lit(WGK[j]);
        if j % 2 == 1 {
            g = g + s * T::lit(WG[j / 2]);
        }
    }
    Piece {
        a,
        b,
        value: k * h,
        error: ((k - g) * h).abs(),
    }
}

/// Integrates `f` over the finite interval `[a, b]`.
///
/// Intervals are bisected in order of largest error estimate until the summed
/// estimate drops below `max(abs_tol, rel_tol * |value|)`. Failing to get there
/// within `max_intervals` is an error.
pub fn integrate<T: Scalar>(mut f: impl FnMut(T) -> T, a: T, b: T, opts: QuadOptions<T>) -> Result<QuadResult<T>> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain("integration limits must be finite".into()));
    }
    if a == b {
        return Ok(QuadResult {
            value: T::zero(),
            error: T::zero(),
            evals: 0,
        });
    }
    let mut pieces = vec![kronrod(&mut f, a, b)];
    let mut evals = 15;
    loop {
        let value = pieces.iter().fold(T::zero(), |s, p| s + p.value);
        let error = pieces.iter().fold(T::zero(), |s, p| s + p.error);
        if !value.is_finite() {
            return Err(Error::Domain("integrand is not finite on the interval".into()));
        }
        let target = opts.abs_tol.max(opts.rel_tol * value.abs());
        // below this the error estimate is dominated by rounding
        let floor = T::epsilon() * T::lit(50.0) * pieces.iter().fold(T::zero(), |s, p| s + p.value.abs());
        if error <= target || error <= floor {
            return Ok(QuadResult { value, error, evals });
        }
        if pieces.len() >= opts.max_intervals {
            return Err(Error::Domain(format!(
                "quadrature did not converge: error estimate {error} after {evals} evaluations"
            )));
        }
        let worst = (0..pieces.len())
            .max_by(|&i, &j| pieces[i].error.partial_cmp(&pieces[j].error).unwrap())
            .unwrap();
        let p = pieces.swap_remove(worst);
        let mid = (p.a + p.b) * T::lit(0.5);
        if mid <= p.a || mid >= p.b {
            return Ok(QuadResult { value, error, evals });
        }
        pieces.push(kronrod(&mut f, p.a, mid));
        pieces.push(kronrod(&mut f, mid, p.b));
        evals += 30;
    }
}

/// Iterated integral of `f(x, y)` over `x` in `[a, b]`, `y` in `[lo(x), hi(x)]`.
///
/// The inner integrals get a tolerance of `abs_tol / (10 (b - a))` so that
/// their errors stay well below the outer target.
pub fn integrate_2d<T: Scalar>(
    f: impl Fn(T, T) -> T,
    a: T,
    b: T,
    lo: impl Fn(T) -> T,
    hi: impl Fn(T) -> T,
    opts: QuadOptions<T>,
) -> Result<QuadResult<T>> {
    let inner = QuadOptions {
        abs_tol: opts.abs_tol / (T::lit(10.0) * (b - a).abs().max(T::one())),
        rel_tol: opts.rel_tol * T::lit(0.1),
        max_intervals: opts.max_intervals,
    };
    let mut failure = None;
    let mut inner_evals = 0;
    let outer = integrate(
        |x| {
            if failure.is_some() {
                return T::zero();
            }
            match integrate(|y| f(x, y), lo(x), hi(x), inner) {
                Ok(r) => {
                    inner_evals += r.evals;
                    r.value
                }
                Err(e) => {
                    failure = Some(e);
                    T::zero()
                }
            }
        },
        a,
        b,
        opts,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(QuadResult {
        evals: outer.evals + inner_evals,
        ..outer
    })
}
