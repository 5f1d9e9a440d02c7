//! Fixed quadrature rules on the reference simplex, given in barycentric
//! coordinates with weights normalized to sum to one (scale by the simplex
//! measure to integrate).

use std::sync::OnceLock;

/// A quadrature rule on the `d`-simplex.
#[derive(Debug, Clone)]
pub struct SimplexRule {
    /// Barycentric coordinates, `d + 1` leading entries valid.
    pub points: Vec<[f64; 4]>,
    /// Weights summing to 1.
    pub weights: Vec<f64>,
}

fn interval_gauss(n: usize) -> SimplexRule {
    // Hardwired Gauss-Legendre nodes on [0, 1].
    let (nodes, weights): (Vec<f64>, Vec<f64>) = match n {
        2 => {
            let o = 1.0 / (3.0f64).sqrt() / 2.0;
            (vec![0.5 - o, 0.5 + o], vec![0.5, 0.5])
        }
        3 => {
            let o = (0.6f64).sqrt() / 2.0;
            (
                vec![0.5 - o, 0.5, 0.5 + o],
                vec![5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0],
            )
        }
        _ => unreachable!(),
    };
    SimplexRule {
        points: nodes.iter().map(|&x| [1.0 - x, x, 0.0, 0.0]).collect(),
        weights,
    }
}

fn triangle_degree2() -> SimplexRule {
    let h = 0.5;
    SimplexRule {
        points: vec![
            [h, h, 0.0, 0.0],
            [0.0, h, h, 0.0],
            [h, 0.0, h, 0.0],
        ],
        weights: vec![1.0 / 3.0; 3],
    }
}

fn triangle_degree4() -> SimplexRule {
    // 6-point rule, degree 4.
    let a = 0.445_948_490_915_965;
    let b = 0.091_576_213_509_771;
    let wa = 0.223_381_589_678_011;
    let wb = 0.109_951_743_655_322;
    let mut points = Vec::with_capacity(6);
    let mut weights = Vec::with_capacity(6);
    for (c, w) in [(a, wa), (b, wb)] {
        let far = 1.0 - 2.0 * c;
        points.push([far, c, c, 0.0]);
        points.push([c, far, c, 0.0]);
        points.push([c, c, far, 0.0]);
        weights.extend([w; 3]);
    }
    SimplexRule { points, weights }
}

fn tet_degree2() -> SimplexRule {
    let a = (5.0 - 5.0f64.sqrt()) / 20.0;
    let far = 1.0 - 3.0 * a;
    let mut points = Vec::with_capacity(4);
    for i in 0..4 {
        let mut p = [a, a, a, a];
        p[i] = far;
        points.push(p);
    }
    SimplexRule {
        points,
        weights: vec![0.25; 4],
    }
}

fn factorial(n: i32) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// All 4-tuples of nonnegative integers summing to `total`.
fn tuples_summing_to(total: i32) -> Vec<[i32; 4]> {
    let mut out = Vec::new();
    for a in 0..=total {
        for b in 0..=total - a {
            for c in 0..=total - a - b {
                out.push([a, b, c, total - a - b - c]);
            }
        }
    }
    out
}

fn tet_degree4() -> SimplexRule {
    // 15-point simplicial rule of degree 5, built from its exact rational
    // form: for index s the nodes have barycentric coordinates
    // (2 beta + 1)/(d + n - 2i) over integer tuples |beta| = s - i, with
    // weights (-1)^i 2^{-2s} (d+n-2i)^d / (i! (d+n-i)!), here scaled by n!
    // so they sum to one. Some weights are negative.
    let s = 2i32;
    let n = 3i32;
    let d = 2 * s + 1;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for i in 0..=s {
        let denom = (d + n - 2 * i) as f64;
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        let w = sign * 2f64.powi(-2 * s) * denom.powi(d)
            / (factorial(i) * factorial(d + n - i))
            * factorial(n);
        for beta in tuples_summing_to(s - i) {
            let mut p = [0.0; 4];
            for (pj, bj) in p.iter_mut().zip(beta) {
                *pj = (2 * bj + 1) as f64 / denom;
            }
            points.push(p);
            weights.push(w);
        }
    }
    SimplexRule { points, weights }
}

/// Rule integrating polynomials of degree 2 exactly on the `dim`-simplex.
pub fn rule_degree2(dim: usize) -> &'static SimplexRule {
    static RULES: OnceLock<[SimplexRule; 3]> = OnceLock::new();
    &RULES.get_or_init(|| [interval_gauss(2), triangle_degree2(), tet_degree2()])[dim - 1]
}

/// Rule integrating polynomials of degree 4 exactly on the `dim`-simplex.
pub fn rule_degree4(dim: usize) -> &'static SimplexRule {
    static RULES: OnceLock<[SimplexRule; 3]> = OnceLock::new();
    &RULES.get_or_init(|| [interval_gauss(3), triangle_degree4(), tet_degree4()])[dim - 1]
}
