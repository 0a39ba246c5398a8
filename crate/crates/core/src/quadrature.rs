//! Globally adaptive Gauss–Kronrod (7/15) quadrature on finite intervals.
//!
//! Known non-smooth points of the integrand (the lattice points `k * epsilon`
//! where the cluster-count probabilities have derivative kinks) are passed as
//! breakpoints so every initial panel is smooth.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error_estimate: f64,
    /// Largest `|f|` seen at any node.
    pub max_abs: f64,
    pub panels: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, max_abs: &mut f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    *max_abs = max_abs.max(fc.abs());
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        *max_abs = max_abs.max(f1.abs()).max(f2.abs());
        kronrod += WGK[j] * (f1 + f2);
        // Gauss nodes sit at the odd Kronrod indices.
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    Panel {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Integrates `f` over `[a, b]` to absolute tolerance `abs_tol`.
///
/// `breakpoints` outside `(a, b)` are ignored. Fails with
/// [`Error::Quadrature`] once `max_panels` panels are in use without meeting
/// the tolerance.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    abs_tol: f64,
    max_panels: usize,
) -> Result<Integral> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!("integration bounds must be finite: [{a}, {b}]")));
    }
    if a == b {
        return Ok(Integral {
            value: 0.0,
            error_estimate: 0.0,
            max_abs: 0.0,
            panels: 0,
        });
    }
    if a > b {
        let r = integrate(f, b, a, breakpoints, abs_tol, max_panels)?;
        return Ok(Integral {
            value: -r.value,
            ..r
        });
    }

    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&x| x > a && x < b)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut max_abs = 0.0;
    let mut panels = Vec::with_capacity(cuts.len() + 16);
    let mut lo = a;
    for &hi in cuts.iter().chain(std::iter::once(&b)) {
        panels.push(gk15(&f, lo, hi, &mut max_abs));
        lo = hi;
    }
    let max_panels = max_panels.max(panels.len());

    loop {
        let total_err: f64 = panels.iter().map(|p| p.error).sum();
        if total_err <= abs_tol {
            break;
        }
        let value: f64 = panels.iter().map(|p| p.value).sum();
        if panels.len() >= max_panels {
            return Err(Error::Quadrature {
                estimate: value,
                error_estimate: total_err,
            });
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .expect("at least one panel");
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        if mid <= p.a || mid >= p.b {
            // Panel cannot be split further in floating point.
            return Err(Error::Quadrature {
                estimate: value,
                error_estimate: total_err,
            });
        }
        panels.push(gk15(&f, p.a, mid, &mut max_abs));
        panels.push(gk15(&f, mid, p.b, &mut max_abs));
    }

    panels.sort_by(|x, y| x.a.total_cmp(&y.a));
    let value = panels.iter().map(|p| p.value).fold(
        crate::special_fn::CompensatedSum::default(),
        |mut acc, v| {
            acc.add(v);
            acc
        },
    );
    Ok(Integral {
        value: value.value(),
        error_estimate: panels.iter().map(|p| p.error).sum(),
        max_abs,
        panels: panels.len(),
    })
}

/// Multiples of `step` strictly inside `(a, b)`.
pub fn lattice_points(step: f64, a: f64, b: f64) -> Vec<f64> {
    if step <= 0.0 || b <= a {
        return Vec::new();
    }
    let first = (a / step).floor().max(0.0) as usize;
    let last = (b / step).ceil() as usize;
    (first..=last)
        .map(|k| k as f64 * step)
        .filter(|&x| x > a && x < b)
        .collect()
}
