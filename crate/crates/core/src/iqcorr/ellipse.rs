//! Ellipse fitting: Taubin algebraic fit followed by Levenberg-Marquardt
//! refinement of the orthogonal (geometric) distances.

use nalgebra::{Matrix2, Matrix5, Matrix6, SymmetricEigen, Vector5, Vector6};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// How a fit stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Algebraic fit only, not refined.
    Algebraic,
    /// Geometric RMS reached the tolerance.
    ToleranceReached,
    /// No further decrease of the cost was possible.
    Stationary,
    /// Iteration budget exhausted.
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EllipseFit {
    pub center: (f64, f64),
    /// Semi-axes `(a, b)` with `a ≥ b > 0`.
    pub semi_axes: (f64, f64),
    /// Angle of the major axis from the I axis, in (−π/2, π/2].
    pub tilt: f64,
    /// Smallest generalized eigenvalue of the Taubin problem (normalized data).
    pub algebraic_residual: f64,
    /// RMS orthogonal distance of the points to the ellipse.
    pub geometric_rms: f64,
    pub iterations: usize,
    /// True when the geometric RMS is within the requested tolerance.
    pub converged: bool,
    pub termination: Termination,
    /// Sum of squared distances after each accepted step, starting with the
    /// initial fit. Empty for algebraic fits.
    pub cost_trace: Vec<f64>,
}

impl EllipseFit {
    fn params(&self) -> [f64; 5] {
        [
            self.center.0,
            self.center.1,
            self.semi_axes.0,
            self.semi_axes.1,
            self.tilt,
        ]
    }

    /// Shape matrix `R·diag(1/a², 1/b²)·Rᵀ` of `(p − c)ᵀ·S·(p − c) = 1`.
    pub fn shape_matrix(&self) -> Matrix2<f64> {
        let (a, b) = self.semi_axes;
        let (s, c) = self.tilt.sin_cos();
        let r = Matrix2::new(c, -s, s, c);
        r * Matrix2::new(1.0 / (a * a), 0.0, 0.0, 1.0 / (b * b)) * r.transpose()
    }

    /// Point on the ellipse at parameter `t`.
    pub fn point_at(&self, t: f64) -> (f64, f64) {
        let (a, b) = self.semi_axes;
        let (s, c) = self.tilt.sin_cos();
        let (u, v) = (a * t.cos(), b * t.sin());
        (self.center.0 + c * u - s * v, self.center.1 + s * u + c * v)
    }
}

fn wrap_half_pi(t: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let mut x = (t + pi / 2.0).rem_euclid(pi) - pi / 2.0;
    if x <= -pi / 2.0 {
        x += pi;
    }
    x
}

/// Canonical `(a ≥ b, tilt in (−π/2, π/2])` form.
fn canonical(cx: f64, cy: f64, a: f64, b: f64, tilt: f64) -> ([f64; 5], bool) {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return ([cx, cy, a, b, tilt], false);
    }
    let (a, b, tilt) = if b > a {
        (b, a, tilt + std::f64::consts::FRAC_PI_2)
    } else {
        (a, b, tilt)
    };
    ([cx, cy, a, b, wrap_half_pi(tilt)], true)
}

/// Taubin fit of a conic to `points`, rejected unless it is a real ellipse.
pub fn fit_ellipse_taubin(points: &[(f64, f64)]) -> Result<EllipseFit> {
    if points.len() < 6 {
        return Err(Error::InsufficientPoints {
            needed: 6,
            got: points.len(),
        });
    }
    let n = points.len() as f64;
    let (mx, my) = points
        .iter()
        .fold((0.0, 0.0), |(sx, sy), &(x, y)| (sx + x, sy + y));
    let (mx, my) = (mx / n, my / n);
    let spread = points
        .iter()
        .map(|&(x, y)| (x - mx).powi(2) + (y - my).powi(2))
        .sum::<f64>()
        / n;
    if !(spread > 0.0) || !spread.is_finite() {
        return Err(Error::DegenerateConic("points coincide"));
    }
    let scale = (spread / 2.0).sqrt();

    let mut m = Matrix6::<f64>::zeros();
    let mut nmat = Matrix5::<f64>::zeros();
    for &(x, y) in points {
        let (u, v) = ((x - mx) / scale, (y - my) / scale);
        let xi = Vector6::new(u * u, u * v, v * v, u, v, 1.0);
        m += xi * xi.transpose();
        let du = Vector5::new(2.0 * u, v, 0.0, 1.0, 0.0);
        let dv = Vector5::new(0.0, u, 2.0 * v, 0.0, 1.0);
        nmat += du * du.transpose() + dv * dv.transpose();
    }
    m /= n;
    nmat /= n;

    // eliminate the constant term: F = −m12ᵀ·θ
    let m11 = m.fixed_view::<5, 5>(0, 0).into_owned();
    let m12 = m.fixed_view::<5, 1>(0, 5).into_owned();
    let reduced = m11 - m12 * m12.transpose();

    let chol = nmat
        .cholesky()
        .ok_or(Error::DegenerateConic("collinear points"))?;
    let l_inv = chol
        .l()
        .try_inverse()
        .ok_or(Error::DegenerateConic("collinear points"))?;
    let sym = l_inv * reduced * l_inv.transpose();
    let sym = (sym + sym.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let (idx, lambda) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("five eigenvalues");
    let w = eig.eigenvectors.column(idx).into_owned();
    let theta = l_inv.transpose() * w;
    let f = -(m12.transpose() * theta)[(0, 0)];
    let (a, b, c, d, e) = (theta[0], theta[1], theta[2], theta[3], theta[4]);

    if b * b - 4.0 * a * c >= 0.0 {
        return Err(Error::DegenerateConic("not an ellipse"));
    }
    let q = Matrix2::new(a, b / 2.0, b / 2.0, c);
    let center = q
        .try_inverse()
        .map(|qi| qi * nalgebra::Vector2::new(-d / 2.0, -e / 2.0))
        .ok_or(Error::DegenerateConic("no centre"))?;
    let (u0, v0) = (center[0], center[1]);
    let f0 = a * u0 * u0 + b * u0 * v0 + c * v0 * v0 + d * u0 + e * v0 + f;
    let qe = SymmetricEigen::new(q);
    let (l1, l2) = (qe.eigenvalues[0], qe.eigenvalues[1]);
    let (s1, s2) = (-f0 / l1, -f0 / l2);
    if !(s1 > 0.0 && s2 > 0.0) {
        return Err(Error::DegenerateConic("imaginary ellipse"));
    }
    let v1 = qe.eigenvectors.column(0);
    let tilt1 = v1[1].atan2(v1[0]);
    let (params, ok) = canonical(
        mx + scale * u0,
        my + scale * v0,
        scale * s1.sqrt(),
        scale * s2.sqrt(),
        tilt1,
    );
    if !ok {
        return Err(Error::DegenerateConic("non-finite axes"));
    }
    let mut fit = from_params(params, lambda.max(0.0));
    fit.geometric_rms = (cost(&params, points) / n).sqrt();
    Ok(fit)
}

fn from_params(p: [f64; 5], algebraic_residual: f64) -> EllipseFit {
    EllipseFit {
        center: (p[0], p[1]),
        semi_axes: (p[2], p[3]),
        tilt: p[4],
        algebraic_residual,
        geometric_rms: f64::NAN,
        iterations: 0,
        converged: false,
        termination: Termination::Algebraic,
        cost_trace: Vec::new(),
    }
}

fn robust_length(x: f64, y: f64) -> f64 {
    x.hypot(y)
}

/// Root of `(r0·z0/(s+r0))² + (z1/(s+1))² − 1` by bisection.
fn ellipse_root(r0: f64, z0: f64, z1: f64, mut g: f64) -> f64 {
    let n0 = r0 * z0;
    let mut s0 = z1 - 1.0;
    let mut s1 = if g < 0.0 {
        0.0
    } else {
        robust_length(n0, z1) - 1.0
    };
    let mut s = 0.0;
    for _ in 0..1100 {
        s = 0.5 * (s0 + s1);
        if s == s0 || s == s1 {
            break;
        }
        let ratio0 = n0 / (s + r0);
        let ratio1 = z1 / (s + 1.0);
        g = ratio0 * ratio0 + ratio1 * ratio1 - 1.0;
        if g > 0.0 {
            s0 = s;
        } else if g < 0.0 {
            s1 = s;
        } else {
            break;
        }
    }
    s
}

/// Closest point on the axis-aligned ellipse `(e0 ≥ e1)` to `(y0, y1)` in the
/// first quadrant.
fn closest_first_quadrant(e0: f64, e1: f64, y0: f64, y1: f64) -> (f64, f64) {
    if y1 > 0.0 {
        if y0 > 0.0 {
            let z0 = y0 / e0;
            let z1 = y1 / e1;
            let g = z0 * z0 + z1 * z1 - 1.0;
            if g != 0.0 {
                let r0 = (e0 / e1).powi(2);
                let s = ellipse_root(r0, z0, z1, g);
                (r0 * y0 / (s + r0), y1 / (s + 1.0))
            } else {
                (y0, y1)
            }
        } else {
            (0.0, e1)
        }
    } else {
        let numer0 = e0 * y0;
        let denom0 = e0 * e0 - e1 * e1;
        if numer0 < denom0 {
            let xde0 = numer0 / denom0;
            (e0 * xde0, e1 * (1.0 - xde0 * xde0).max(0.0).sqrt())
        } else {
            (e0, 0.0)
        }
    }
}

/// Signed orthogonal distance (positive outside) and its gradient with
/// respect to `(cx, cy, a, b, tilt)`.
fn residual(p: &[f64; 5], (px, py): (f64, f64)) -> (f64, [f64; 5]) {
    let [cx, cy, a, b, tilt] = *p;
    let (s, c) = tilt.sin_cos();
    let (dx, dy) = (px - cx, py - cy);
    let (lx, ly) = (c * dx + s * dy, -s * dx + c * dy);
    let (qx, qy) = closest_first_quadrant(a, b, lx.abs(), ly.abs());
    let (qx, qy) = (qx.copysign(lx), qy.copysign(ly));
    let inside = (lx / a).powi(2) + (ly / b).powi(2) < 1.0;
    let dist = ((lx - qx).powi(2) + (ly - qy).powi(2)).sqrt();
    let d = if inside { -dist } else { dist };
    // outward normal at the closest point, local frame
    let (nx, ny) = (qx / (a * a), qy / (b * b));
    let nn = nx.hypot(ny);
    let (nx, ny) = if nn > 0.0 {
        (nx / nn, ny / nn)
    } else {
        (1.0, 0.0)
    };
    let (ct, st) = (qx / a, qy / b);
    // derivatives of the closest point in the local frame, projected on n
    let d_a = -(nx * ct);
    let d_b = -(ny * st);
    // rotation moves the point perpendicular to its local position
    let d_tilt = -(nx * (-qy) + ny * qx);
    // centre shift, rotated into the local frame
    let d_cx = -(nx * c - ny * s);
    let d_cy = -(nx * s + ny * c);
    (d, [d_cx, d_cy, d_a, d_b, d_tilt])
}

// residuals are evaluated in parallel but always summed in input order, so
// fits are reproducible bit for bit
fn cost(p: &[f64; 5], points: &[(f64, f64)]) -> f64 {
    let r: Vec<f64> = points.par_iter().map(|&q| residual(p, q).0).collect();
    r.iter().map(|v| v * v).sum()
}

fn normal_equations(p: &[f64; 5], points: &[(f64, f64)]) -> (Matrix5<f64>, Vector5<f64>) {
    let rows: Vec<(f64, [f64; 5])> = points.par_iter().map(|&q| residual(p, q)).collect();
    let mut jtj = Matrix5::zeros();
    let mut jtr = Vector5::zeros();
    for (r, g) in rows {
        let g = Vector5::from(g);
        jtj += g * g.transpose();
        jtr += g * r;
    }
    (jtj, jtr)
}

/// Levenberg-Marquardt refinement of the orthogonal distances.
///
/// Damping starts at 1e-3 and is divided by 10 on an accepted step and
/// multiplied by 10 on a rejected one. Accepted steps never increase the
/// cost. `max_iters = 0` returns the input unchanged.
pub fn refine_ellipse_lm(
    fit: &EllipseFit,
    points: &[(f64, f64)],
    tol: f64,
    max_iters: usize,
) -> Result<EllipseFit> {
    if points.len() < 6 {
        return Err(Error::InsufficientPoints {
            needed: 6,
            got: points.len(),
        });
    }
    let n = points.len() as f64;
    let mut p = fit.params();
    let mut current = cost(&p, points);
    let mut trace = vec![current];
    if max_iters == 0 {
        let mut out = fit.clone();
        out.geometric_rms = (current / n).sqrt();
        out.converged = false;
        out.termination = Termination::MaxIterations;
        out.cost_trace = trace;
        return Ok(out);
    }
    let mut lambda = 1e-3;
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;
    while iterations < max_iters {
        if (current / n).sqrt() <= tol {
            termination = Termination::ToleranceReached;
            break;
        }
        iterations += 1;
        let (jtj, jtr) = normal_equations(&p, points);
        let floor = 1e-12 * jtj.diagonal().max().max(f64::MIN_POSITIVE);
        let mut accepted = false;
        while lambda < 1e16 {
            let mut damped = jtj;
            for i in 0..5 {
                damped[(i, i)] += lambda * (jtj[(i, i)] + floor);
            }
            let step = damped.cholesky().map(|ch| ch.solve(&(-jtr)));
            if let Some(step) = step {
                let trial = [
                    p[0] + step[0],
                    p[1] + step[1],
                    p[2] + step[2],
                    p[3] + step[3],
                    p[4] + step[4],
                ];
                let (trial, ok) = canonical(trial[0], trial[1], trial[2], trial[3], trial[4]);
                if ok {
                    let c = cost(&trial, points);
                    if c < current {
                        let relative = (current - c) / current.max(f64::MIN_POSITIVE);
                        p = trial;
                        current = c;
                        trace.push(c);
                        lambda = (lambda / 10.0).max(1e-15);
                        accepted = true;
                        if relative < 1e-14 {
                            termination = Termination::Stationary;
                        }
                        break;
                    }
                }
            }
            lambda *= 10.0;
        }
        if !accepted {
            termination = Termination::Stationary;
            break;
        }
        if termination == Termination::Stationary {
            break;
        }
    }
    let rms = (current / n).sqrt();
    if termination == Termination::MaxIterations && rms <= tol {
        termination = Termination::ToleranceReached;
    }
    let mut out = from_params(p, fit.algebraic_residual);
    out.geometric_rms = rms;
    out.iterations = iterations;
    out.converged = rms <= tol;
    out.termination = termination;
    out.cost_trace = trace;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn ellipse_points(cx: f64, cy: f64, a: f64, b: f64, tilt: f64, n: usize) -> Vec<(f64, f64)> {
        let (s, c) = f64::sin_cos(tilt);
        (0..n)
            .map(|i| {
                let t = std::f64::consts::TAU * i as f64 / n as f64 + 0.1;
                let (u, v) = (a * t.cos(), b * t.sin());
                (cx + c * u - s * v, cy + s * u + c * v)
            })
            .collect()
    }

    #[test]
    fn unit_circle() {
        let pts = ellipse_points(0.0, 0.0, 1.0, 1.0, 0.0, 50);
        let fit = fit_ellipse_taubin(&pts).unwrap();
        assert!(fit.center.0.abs() < 1e-10 && fit.center.1.abs() < 1e-10);
        assert!((fit.semi_axes.0 - 1.0).abs() < 1e-10);
        assert!((fit.semi_axes.1 - 1.0).abs() < 1e-10);
        assert!(fit.algebraic_residual < 1e-10);
    }

    #[test]
    fn tilted_ellipse_geometry() {
        let pts = ellipse_points(0.3, -0.2, 2.0, 0.5, 0.4, 40);
        let fit = fit_ellipse_taubin(&pts).unwrap();
        assert!((fit.center.0 - 0.3).abs() < 1e-9);
        assert!((fit.center.1 + 0.2).abs() < 1e-9);
        assert!((fit.semi_axes.0 - 2.0).abs() < 1e-9);
        assert!((fit.semi_axes.1 - 0.5).abs() < 1e-9);
        assert!((fit.tilt - 0.4).abs() < 1e-9);
        assert!(fit.geometric_rms < 1e-9);
    }

    #[test]
    fn too_few_points() {
        let pts = ellipse_points(0.0, 0.0, 1.0, 1.0, 0.0, 5);
        assert!(matches!(
            fit_ellipse_taubin(&pts),
            Err(Error::InsufficientPoints { needed: 6, got: 5 })
        ));
    }

    #[test]
    fn collinear_points_rejected() {
        let pts: Vec<(f64, f64)> = (0..20).map(|i| (i as f64, 2.0 * i as f64)).collect();
        assert!(matches!(
            fit_ellipse_taubin(&pts),
            Err(Error::DegenerateConic(_))
        ));
    }

    #[test]
    fn hyperbola_rejected() {
        let pts: Vec<(f64, f64)> = (1..30)
            .flat_map(|i| {
                let x = 0.2 * i as f64;
                [(x, 1.0 / x), (-x, -1.0 / x)]
            })
            .collect();
        assert!(matches!(
            fit_ellipse_taubin(&pts),
            Err(Error::DegenerateConic(_))
        ));
    }

    #[test]
    fn closest_point_matches_brute_force() {
        let e = from_params([0.1, 0.2, 1.5, 0.7, 0.3], 0.0);
        for &(px, py) in &[
            (3.0, 1.0),
            (0.1, 0.25),
            (-1.0, 0.9),
            (0.5, -2.0),
            (0.1, 0.2),
        ] {
            let (d, _) = residual(&e.params(), (px, py));
            let brute = (0..200_000)
                .map(|i| {
                    let (x, y) = e.point_at(std::f64::consts::TAU * i as f64 / 200_000.0);
                    ((x - px).powi(2) + (y - py).powi(2)).sqrt()
                })
                .fold(f64::INFINITY, f64::min);
            assert!((d.abs() - brute).abs() < 1e-6, "{px},{py}: {d} vs {brute}");
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = [0.1, -0.2, 1.3, 0.8, 0.25];
        for &q in &[(2.0, 0.5), (0.3, 0.1), (-0.7, -1.4)] {
            let (_, g) = residual(&p, q);
            for i in 0..5 {
                let h = 1e-6;
                let (mut up, mut dn) = (p, p);
                up[i] += h;
                dn[i] -= h;
                let fd = (residual(&up, q).0 - residual(&dn, q).0) / (2.0 * h);
                assert!((fd - g[i]).abs() < 1e-5, "param {i}: {fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn noiseless_refinement() {
        let pts = ellipse_points(0.0, 0.0, 1.0, 0.9, 0.7, 64);
        let init = fit_ellipse_taubin(&pts).unwrap();
        let fit = refine_ellipse_lm(&init, &pts, 1e-9, 50).unwrap();
        assert!(fit.converged);
        assert!(fit.iterations <= 10);
        assert!(fit.geometric_rms < 1e-9);
    }

    #[test]
    fn refinement_from_perturbed_start() {
        let pts = ellipse_points(0.2, 0.1, 1.0, 0.6, -0.3, 100);
        let mut init = fit_ellipse_taubin(&pts).unwrap();
        init.center.0 += 0.05;
        init.semi_axes.0 *= 1.1;
        init.tilt += 0.1;
        let fit = refine_ellipse_lm(&init, &pts, 1e-10, 100).unwrap();
        assert!(fit.converged, "{:?}", fit.termination);
        assert!(fit.cost_trace.windows(2).all(|w| w[1] <= w[0]));
        assert!((fit.tilt + 0.3).abs() < 1e-8);
    }

    #[test]
    fn zero_iterations_is_a_no_op() {
        let pts = ellipse_points(0.0, 0.0, 1.0, 0.5, 0.0, 20);
        let init = fit_ellipse_taubin(&pts).unwrap();
        let out = refine_ellipse_lm(&init, &pts, 1e-3, 0).unwrap();
        assert!(!out.converged);
        assert_eq!(out.center, init.center);
        assert_eq!(out.semi_axes, init.semi_axes);
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn noisy_points_rms_tracks_sigma() {
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(4);
        let sigma = 0.01;
        let noise = Normal::new(0.0, sigma).unwrap();
        let mut ratios = Vec::new();
        for _ in 0..20 {
            let pts: Vec<(f64, f64)> = ellipse_points(0.0, 0.0, 1.0, 0.95, 0.2, 400)
                .into_iter()
                .map(|(x, y)| (x + noise.sample(&mut rng), y + noise.sample(&mut rng)))
                .collect();
            let init = fit_ellipse_taubin(&pts).unwrap();
            let fit = refine_ellipse_lm(&init, &pts, 1e-12, 100).unwrap();
            assert!(fit.cost_trace.windows(2).all(|w| w[1] <= w[0]));
            assert!(!fit.converged);
            ratios.push(fit.geometric_rms / sigma);
        }
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        assert!((mean - 1.0).abs() < 0.2, "{mean}");
    }
}
