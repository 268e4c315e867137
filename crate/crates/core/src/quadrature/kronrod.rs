//! Globally adaptive Gauss-Kronrod (G10/K21) bisection on `[0, 1]`.
//!
//! The node function returns a value together with its own error estimate
//! and evaluation count, so the same driver serves plain integrands and
//! nested inner integrals.

use rayon::prelude::*;

use crate::error::Result;

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_600_525_452_188,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

const INITIAL_SEGMENTS: usize = 4;
const MAX_SEGMENTS: usize = 4000;

/// Value of the integrand at one abscissa, possibly itself an integral.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Node {
    pub value: f64,
    pub err: f64,
    pub evals: u64,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
    splittable: bool,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Outcome {
    pub value: f64,
    pub err: f64,
    pub evals: u64,
    pub converged: bool,
}

fn abscissae(a: f64, b: f64) -> [f64; 21] {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut x = [0.0; 21];
    for i in 0..10 {
        x[i] = c - h * XGK[i];
        x[20 - i] = c + h * XGK[i];
    }
    x[10] = c;
    x
}

fn rule<G>(g: &G, a: f64, b: f64, parallel: bool) -> Result<(Segment, u64)>
where
    G: Fn(f64) -> Result<Node> + Sync,
{
    let x = abscissae(a, b);
    let nodes: Vec<Node> = if parallel {
        x.par_iter().map(|&t| g(t)).collect::<Result<_>>()?
    } else {
        x.iter().map(|&t| g(t)).collect::<Result<_>>()?
    };
    let h = 0.5 * (b - a);
    let weight = |i: usize| WGK[if i <= 10 { i } else { 20 - i }];

    let mut kronrod = 0.0;
    let mut resabs = 0.0;
    let mut inner_err = 0.0;
    let mut evals = 0;
    for (i, n) in nodes.iter().enumerate() {
        kronrod += weight(i) * n.value;
        resabs += weight(i) * n.value.abs();
        inner_err += weight(i) * n.err;
        evals += n.evals;
    }
    let mut gauss = 0.0;
    for (j, w) in WG.iter().enumerate() {
        let i = 2 * j + 1;
        gauss += w * (nodes[i].value + nodes[20 - i].value);
    }
    let mean = 0.5 * kronrod;
    let resasc: f64 = nodes
        .iter()
        .enumerate()
        .map(|(i, n)| weight(i) * (n.value - mean).abs())
        .sum();

    let kronrod = kronrod * h;
    let resabs = resabs * h.abs();
    let resasc = resasc * h.abs();
    let mut err = (kronrod - gauss * h).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    err += inner_err * h.abs();

    Ok((
        Segment {
            a,
            b,
            value: kronrod,
            err,
            splittable: splittable(a, b),
        },
        evals,
    ))
}

// Bisection continues towards an endpoint as long as the halves stay
// distinguishable in floating point; endpoint singularities need this.
fn splittable(a: f64, b: f64) -> bool {
    let w = b - a;
    w > 1e-250 && w > 64.0 * f64::EPSILON * a.abs().max(b.abs())
}

/// Integrates `g` over `[0, 1]` until the summed segment error is below
/// `max(abs_tol, rel_tol·|value|)` or the evaluation budget is spent.
pub(crate) fn adapt<G>(
    g: &G,
    abs_tol: f64,
    rel_tol: f64,
    budget: u64,
    parallel: bool,
) -> Result<Outcome>
where
    G: Fn(f64) -> Result<Node> + Sync,
{
    let mut segments = Vec::with_capacity(64);
    let mut evals = 0;
    for i in 0..INITIAL_SEGMENTS {
        let a = i as f64 / INITIAL_SEGMENTS as f64;
        let b = (i + 1) as f64 / INITIAL_SEGMENTS as f64;
        let (s, n) = rule(g, a, b, parallel)?;
        segments.push(s);
        evals += n;
    }
    loop {
        let value: f64 = segments.iter().map(|s| s.value).sum();
        let err: f64 = segments.iter().map(|s| s.err).sum();
        let tol = abs_tol.max(rel_tol * value.abs());
        if err <= tol {
            return Ok(Outcome { value, err, evals, converged: true });
        }
        let worst = segments
            .iter()
            .enumerate()
            .filter(|(_, s)| s.splittable)
            .max_by(|x, y| x.1.err.total_cmp(&y.1.err))
            .map(|(i, _)| i);
        let stop = evals >= budget || segments.len() >= MAX_SEGMENTS;
        let Some(i) = worst.filter(|_| !stop) else {
            return Ok(Outcome { value, err, evals, converged: false });
        };
        let s = segments[i];
        let mid = 0.5 * (s.a + s.b);
        let (left, nl) = rule(g, s.a, mid, parallel)?;
        let (right, nr) = rule(g, mid, s.b, parallel)?;
        evals += nl + nr;
        segments[i] = left;
        segments.push(right);
    }
}
