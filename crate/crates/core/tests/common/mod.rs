//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use harmonic_cascade::model::{drift, PhaseSpacePoint, SystemParams};
use nalgebra::{DMatrix, DVector, Matrix6};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;

pub type C = Complex64;

pub fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

pub fn cavity(eps: f64) -> SystemParams {
    SystemParams::intracavity(0.005, 0.02, [1.0, 0.5, 0.5], eps).unwrap()
}

/// Real root of `k1²/(2γ₂) x³ + γ₁ x − ε = 0`, the fundamental amplitude of
/// plain intracavity second-harmonic generation, by bisection.
pub fn shg_fundamental(k1: f64, g1: f64, g2: f64, eps: f64) -> f64 {
    let f = |x: f64| k1 * k1 / (2.0 * g2) * x.powi(3) + g1 * x - eps;
    let (mut lo, mut hi) = (0.0f64.min(eps / g1), 0.0f64.max(eps / g1));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn state_vec(q: &PhaseSpacePoint) -> [C; 6] {
    [q.a1, q.a1p, q.a2, q.a2p, q.a3, q.a3p]
}

fn point(s: [C; 6]) -> PhaseSpacePoint {
    PhaseSpacePoint { t: 0.0, a1: s[0], a1p: s[1], a2: s[2], a2p: s[3], a3: s[4], a3p: s[5] }
}

fn drift_vec(p: &SystemParams, s: [C; 6]) -> [C; 6] {
    drift(p, &point(s)).unwrap().0
}

/// Central-difference Jacobian of the drift, one real perturbation per
/// variable with step `rel·max(|x|, 1)`.
pub fn finite_difference_jacobian(p: &SystemParams, at: &PhaseSpacePoint, rel: f64) -> Matrix6<C> {
    let s0 = state_vec(at);
    let mut jac = Matrix6::zeros();
    for col in 0..6 {
        let h = rel * s0[col].norm().max(1.0);
        let (mut up, mut down) = (s0, s0);
        up[col] += h;
        down[col] -= h;
        let (fu, fd) = (drift_vec(p, up), drift_vec(p, down));
        for row in 0..6 {
            jac[(row, col)] = (fu[row] - fd[row]) / (2.0 * h);
        }
    }
    jac
}

/// Solves `A σ + σ Aᵀ = D` through the 36×36 Kronecker system.
pub fn lyapunov(a: &Matrix6<C>, d: &Matrix6<C>) -> Matrix6<C> {
    let n = 6;
    let mut big = DMatrix::<C>::zeros(n * n, n * n);
    // vec index of σ_ij is i·6 + j
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                big[(i * n + j, k * n + j)] += a[(i, k)];
                big[(i * n + j, i * n + k)] += a[(j, k)];
            }
        }
    }
    let rhs = DVector::from_iterator(n * n, (0..n * n).map(|idx| d[(idx / n, idx % n)]));
    let sol = big.lu().solve(&rhs).expect("Lyapunov system is regular for a stable A");
    Matrix6::from_fn(|i, j| sol[i * n + j])
}

/// Mean drift of the quadratic terms for fluctuations with second moments
/// `σ`: `Σ_jk c_ijk σ_jk` where `c` is read off the drift by polarization.
pub fn quadratic_mean_drift(p: &SystemParams, sigma: &Matrix6<C>) -> [C; 6] {
    let zero = [C::new(0.0, 0.0); 6];
    let f0 = drift_vec(p, zero);
    let unit = |j: usize| {
        let mut s = zero;
        s[j] = C::new(1.0, 0.0);
        s
    };
    let quad = |s: [C; 6]| {
        // q(x) = [f(x) + f(−x)]/2 − f(0)
        let neg = s.map(|z| -z);
        let (fp, fm) = (drift_vec(p, s), drift_vec(p, neg));
        let mut q = [C::new(0.0, 0.0); 6];
        for i in 0..6 {
            q[i] = 0.5 * (fp[i] + fm[i]) - f0[i];
        }
        q
    };
    let mut out = [C::new(0.0, 0.0); 6];
    for j in 0..6 {
        for k in 0..6 {
            let mut both = unit(j);
            both[k] += C::new(1.0, 0.0);
            let (qjk, qj, qk) = (quad(both), quad(unit(j)), quad(unit(k)));
            for i in 0..6 {
                // coefficient of x_j x_k in q_i, halved off the diagonal
                let cij = if j == k { qj[i] } else { 0.5 * (qjk[i] - qj[i] - qk[i]) };
                out[i] += cij * sigma[(j, k)];
            }
        }
    }
    out
}

/// Block map `(α, α⁺) → (X, Y)` built from scratch.
pub fn quadrature_map() -> Matrix6<C> {
    let mut q = Matrix6::zeros();
    for m in 0..3 {
        q[(2 * m, 2 * m)] = c(1.0, 0.0);
        q[(2 * m, 2 * m + 1)] = c(1.0, 0.0);
        q[(2 * m + 1, 2 * m)] = c(0.0, -1.0);
        q[(2 * m + 1, 2 * m + 1)] = c(0.0, 1.0);
    }
    q
}

/// Reid product from a quadrature covariance, written out longhand.
pub fn reid_product(cov: &Matrix6<f64>, j: usize, k: usize) -> f64 {
    let (xj, yj, xk, yk) = (2 * j, 2 * j + 1, 2 * k, 2 * k + 1);
    let vx = cov[(xj, xj)] - cov[(xj, xk)] * cov[(xj, xk)] / cov[(xk, xk)];
    let vy = cov[(yj, yj)] - cov[(yj, yk)] * cov[(yj, yk)] / cov[(yk, yk)];
    vx * vy
}

/// Welch estimate of the diagonal spectra of `dX = −A X dt + B dW`,
/// simulated by Euler-Maruyama with complex `B` and real Wiener increments.
/// Returns `spectra[i][bin]` for FFT bins of width `d_omega`.
pub struct Periodogram {
    pub d_omega: f64,
    pub n: usize,
    pub spectra: Vec<Vec<C>>,
    pub segments: usize,
}

impl Periodogram {
    /// Bin of angular frequency `omega` (which must be a multiple of the
    /// bin width).
    pub fn bin(&self, omega: f64) -> usize {
        let k = (omega / self.d_omega).round() as i64;
        k.rem_euclid(self.n as i64) as usize
    }
}

pub fn simulate_periodogram(
    a: &Matrix6<C>,
    b: &Matrix6<C>,
    d_omega: f64,
    n: usize,
    segments: usize,
    seed: u64,
) -> Periodogram {
    let dt = 2.0 * PI / (d_omega * n as f64);
    let sq = dt.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step_matrix = Matrix6::<C>::identity() - a * C::new(dt, 0.0);
    let mut x = nalgebra::Vector6::<C>::zeros();
    let mut draw = |x: &mut nalgebra::Vector6<C>| {
        let w = nalgebra::Vector6::<C>::from_fn(|_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            C::new(z * sq, 0.0)
        });
        *x = step_matrix * *x + b * w;
    };
    // settle into the stationary state
    let relax = (200.0 / dt) as usize;
    for _ in 0..relax {
        draw(&mut x);
    }

    let window: Vec<f64> = (0..n).map(|i| (PI * i as f64 / n as f64).sin().powi(2)).collect();
    let norm = dt / window.iter().map(|w| w * w).sum::<f64>();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let half = n / 2;
    let mut buf: Vec<Vec<C>> = (0..6).map(|_| Vec::with_capacity(n)).collect();
    for _ in 0..half {
        draw(&mut x);
        for i in 0..6 {
            buf[i].push(x[i]);
        }
    }
    let mut spectra = vec![vec![C::new(0.0, 0.0); n]; 6];
    for _ in 0..segments {
        for i in 0..6 {
            let excess = buf[i].len() - half;
            buf[i].drain(..excess);
        }
        for _ in 0..half {
            draw(&mut x);
            for i in 0..6 {
                buf[i].push(x[i]);
            }
        }
        for i in 0..6 {
            let mut f: Vec<C> = buf[i].iter().zip(&window).map(|(z, w)| z * *w).collect();
            fft.process(&mut f);
            for k in 0..n {
                // E[x̃(ω) x̃(−ω)] rather than |x̃|²: trajectories are complex
                spectra[i][k] += f[k] * f[(n - k) % n] * norm;
            }
        }
    }
    for s in spectra.iter_mut() {
        for v in s.iter_mut() {
            *v /= segments as f64;
        }
    }
    Periodogram { d_omega, n, spectra, segments }
}
