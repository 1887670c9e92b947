//! Dormand–Prince 5(4) integrator for autonomous systems with dense output.

/// Step-size control settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, h_init: 1e-3, h_min: 1e-14, h_max: 1.0 }
    }
}

/// One accepted step with its continuous extension.
#[derive(Debug, Clone, Copy)]
pub struct Step<const D: usize> {
    pub t0: f64,
    pub h: f64,
    pub y0: [f64; D],
    pub y1: [f64; D],
    rcont: [[f64; D]; 5],
}

impl<const D: usize> Step<D> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    /// State at `t0 + theta * h`, `theta ∈ [0, 1]`.
    pub fn at(&self, theta: f64) -> [f64; D] {
        let t1 = 1.0 - theta;
        let r = &self.rcont;
        let mut out = [0.0; D];
        for i in 0..D {
            out[i] = r[0][i] + theta * (r[1][i] + t1 * (r[2][i] + theta * (r[3][i] + t1 * r[4][i])));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepFailure {
    /// The field could not be evaluated at the current state.
    Field,
    /// The step size fell below `h_min`.
    Underflow { h: f64 },
}

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const DENSE: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Adaptive stepper state for `y' = f(y)`.
#[derive(Debug, Clone)]
pub struct Stepper<const D: usize> {
    pub t: f64,
    pub y: [f64; D],
    pub h: f64,
    pub tol: Tolerances,
}

impl<const D: usize> Stepper<D> {
    pub fn new(y: [f64; D], tol: Tolerances) -> Self {
        Self { t: 0.0, y, h: tol.h_init, tol }
    }

    /// Replaces the state (e.g. after a projection) without touching `t` or `h`.
    pub fn reset_state(&mut self, y: [f64; D]) {
        self.y = y;
    }

    /// Attempts steps until one is accepted.
    pub fn step<F>(&mut self, f: &mut F) -> Result<Step<D>, StepFailure>
    where
        F: FnMut(&[f64; D]) -> Option<[f64; D]>,
    {
        let k1 = f(&self.y).ok_or(StepFailure::Field)?;
        loop {
            let h = self.h;
            if h.abs() < self.tol.h_min {
                return Err(StepFailure::Underflow { h });
            }
            match self.try_step(f, &k1, h) {
                Some((y1, err, k)) if err <= 1.0 => {
                    let step = self.dense(h, y1, &k);
                    let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                    self.h = (h * fac).clamp(-self.tol.h_max, self.tol.h_max);
                    self.t += h;
                    self.y = y1;
                    return Ok(step);
                }
                Some((_, err, _)) if err.is_finite() => {
                    let fac = (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
                    self.h = h * fac;
                }
                _ => self.h = h * 0.25,
            }
        }
    }

    fn try_step<F>(&self, f: &mut F, k1: &[f64; D], h: f64) -> Option<([f64; D], f64, [[f64; D]; 7])>
    where
        F: FnMut(&[f64; D]) -> Option<[f64; D]>,
    {
        let mut k = [[0.0; D]; 7];
        k[0] = *k1;
        for s in 1..7 {
            let mut ys = self.y;
            for (j, kj) in k.iter().enumerate().take(s) {
                let a = A[s][j];
                if a != 0.0 {
                    for i in 0..D {
                        ys[i] += h * a * kj[i];
                    }
                }
            }
            k[s] = f(&ys)?;
            if k[s].iter().any(|v| !v.is_finite()) {
                return None;
            }
        }
        let mut y1 = self.y;
        for i in 0..D {
            for s in 0..6 {
                y1[i] += h * A[6][s] * k[s][i];
            }
        }
        let mut acc = 0.0;
        for i in 0..D {
            let e: f64 = h * (0..7).map(|s| E[s] * k[s][i]).sum::<f64>();
            let sc = self.tol.atol + self.tol.rtol * self.y[i].abs().max(y1[i].abs());
            acc += (e / sc).powi(2);
        }
        Some((y1, (acc / D as f64).sqrt(), k))
    }

    fn dense(&self, h: f64, y1: [f64; D], k: &[[f64; D]; 7]) -> Step<D> {
        let y0 = self.y;
        let mut r = [[0.0; D]; 5];
        for i in 0..D {
            let ydiff = y1[i] - y0[i];
            let bspl = h * k[0][i] - ydiff;
            r[0][i] = y0[i];
            r[1][i] = ydiff;
            r[2][i] = bspl;
            r[3][i] = ydiff - h * k[6][i] - bspl;
            r[4][i] = h * (0..7).map(|s| DENSE[s] * k[s][i]).sum::<f64>();
        }
        Step { t0: self.t, h, y0, y1, rcont: r }
    }
}

/// Bisection for a sign change of `g` on `[lo, hi]`, to `tol` in `theta`.
pub fn bisect<G: FnMut(f64) -> f64>(mut g: G, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut glo = g(lo);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let gm = g(mid);
        if gm == 0.0 {
            return mid;
        }
        if (gm > 0.0) == (glo > 0.0) {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
