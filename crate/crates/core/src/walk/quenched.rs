//! Exact quenched survival for one walker in a fixed environment.
//!
//! The sub-probability vector `u(s, x) = P_ω(τ ≥ s, X_s = x)` solves the
//! forward equation of the walk between disasters, and at a disaster at
//! `(s, x)` the entry `u(x)` is set to zero. Between disasters the walk
//! kernel is applied by uniformization: `exp(κΔ(P - I)) = Σ_n Pois(n; κΔ) Pⁿ`.
//! The lattice is cut to a cube whose half-width grows with time so that
//! the mass that could have left it is below `exp(-budget)`. Values are
//! kept normalized with a separate log scale, so `log S(t)` is available far
//! below the smallest double.

use crate::env::Environment;
use crate::error::{invalid, Error, Result};
use crate::lattice::Site;

/// `ln(f64::MIN_POSITIVE)`. Log-survival values below this count as censored.
pub const LOG_FLOOR: f64 = -708.3964185322641;

/// Largest number of lattice sites the solver will allocate.
pub const MAX_SITES: usize = 4_000_000;

/// Mean jump count per uniformization chunk.
const CHUNK: f64 = 30.0;

/// Chernoff bound on `ln P(max_{s ≤ t} |X^i_s| ≥ r for some i)` for a walk
/// whose coordinates jump `mu` times in expectation.
fn log_escape_bound(r: f64, mu: f64, d: usize) -> f64 {
    if mu == 0.0 {
        return f64::NEG_INFINITY;
    }
    let a = r / mu;
    // reflection doubles the one-sided bound; two sides; d coordinates
    (4.0 * d as f64).ln() - (r * a.asinh() - mu * ((1.0 + a * a).sqrt() - 1.0))
}

/// Smallest half-width, at least `from`, that keeps the escape bound below `exp(-budget)`.
pub fn window_radius(mu: f64, d: usize, budget: f64, from: usize) -> usize {
    let mut r = from;
    while log_escape_bound(r as f64, mu, d) > -budget {
        r += 1;
    }
    r
}

struct Grid {
    d: usize,
    /// Half-width of the allocated cube.
    radius: usize,
    width: usize,
    strides: Vec<usize>,
    /// Current active half-width and the linear indices of the active cube.
    h: usize,
    active: Vec<usize>,
}

impl Grid {
    fn new(d: usize, radius: usize) -> Result<Self> {
        let width = 2 * radius + 1;
        let mut n: usize = 1;
        let mut strides = Vec::with_capacity(d);
        for _ in 0..d {
            strides.push(n);
            n = n
                .checked_mul(width)
                .filter(|&n| n <= MAX_SITES)
                .ok_or(Error::WindowTooLarge {
                    sites: (width as f64).powi(d as i32) as usize,
                })?;
        }
        let mut g = Grid {
            d,
            radius,
            width,
            strides,
            h: 0,
            active: Vec::new(),
        };
        g.set_active(0);
        Ok(g)
    }

    fn len(&self) -> usize {
        self.width.pow(self.d as u32)
    }

    fn center(&self) -> usize {
        self.strides.iter().map(|s| s * self.radius).sum()
    }

    fn index_of(&self, site: &Site) -> usize {
        site.coords()
            .iter()
            .zip(&self.strides)
            .map(|(&c, s)| (c + self.radius as i32) as usize * s)
            .sum()
    }

    fn set_active(&mut self, h: usize) {
        let h = h.min(self.radius);
        if h == self.h && !self.active.is_empty() {
            return;
        }
        self.h = h;
        let lo = self.radius - h;
        let side = 2 * h + 1;
        let count = side.pow(self.d as u32);
        self.active.clear();
        self.active.reserve(count);
        let mut digits = vec![0usize; self.d];
        for _ in 0..count {
            self.active
                .push(digits.iter().zip(&self.strides).map(|(&c, s)| (lo + c) * s).sum());
            for dg in digits.iter_mut() {
                *dg += 1;
                if *dg < side {
                    break;
                }
                *dg = 0;
            }
        }
    }

    /// `dst = P src` on the active cube, reflecting at its faces.
    fn apply(&self, src: &[f64], dst: &mut [f64]) {
        let lo = self.radius - self.h;
        let hi = self.radius + self.h;
        if self.d == 1 {
            if lo == hi {
                dst[lo] = src[lo];
                return;
            }
            dst[lo] = 0.5 * (src[lo] + src[lo + 1]);
            for i in lo + 1..hi {
                dst[i] = 0.5 * (src[i - 1] + src[i + 1]);
            }
            dst[hi] = 0.5 * (src[hi - 1] + src[hi]);
            return;
        }
        let inv = 1.0 / (2 * self.d) as f64;
        for &i in &self.active {
            let mut s = 0.0;
            for &st in &self.strides {
                let c = (i / st) % self.width;
                s += if c > lo { src[i - st] } else { src[i] };
                s += if c < hi { src[i + st] } else { src[i] };
            }
            dst[i] = s * inv;
        }
    }

    fn in_active(&self, i: usize) -> bool {
        let lo = self.radius - self.h;
        let hi = self.radius + self.h;
        self.strides.iter().all(|&st| {
            let c = (i / st) % self.width;
            c >= lo && c <= hi
        })
    }
}

struct Solver {
    grid: Grid,
    u: Vec<f64>,
    v: Vec<f64>,
    tmp: Vec<f64>,
    acc: Vec<f64>,
    log_scale: f64,
    dead: bool,
    kappa: f64,
    d: usize,
    budget: f64,
    now: f64,
}

impl Solver {
    fn sum(&self) -> f64 {
        self.grid.active.iter().map(|&i| self.u[i]).sum()
    }

    fn grow_to(&mut self, t: f64) {
        let mu = self.kappa * t / self.d as f64;
        let h = window_radius(mu, self.d, self.budget, self.grid.h);
        self.grid.set_active(h);
    }

    /// Advance `u` from `now` to `t` without disasters.
    fn propagate_to(&mut self, t: f64) {
        let mu_total = self.kappa * (t - self.now);
        self.now = t;
        if mu_total <= 0.0 || self.dead {
            return;
        }
        self.grow_to(t);
        let chunks = (mu_total / CHUNK).ceil().max(1.0) as usize;
        let mu = mu_total / chunks as f64;
        for _ in 0..chunks {
            let mut w = (-mu).exp();
            let mut cum = w;
            for &i in &self.grid.active {
                self.v[i] = self.u[i];
                self.acc[i] = w * self.u[i];
            }
            let mut n = 1usize;
            loop {
                self.grid.apply(&self.v, &mut self.tmp);
                std::mem::swap(&mut self.v, &mut self.tmp);
                w *= mu / n as f64;
                cum += w;
                for &i in &self.grid.active {
                    self.acc[i] += w * self.v[i];
                }
                if n as f64 > mu && w < 1e-18 * cum {
                    break;
                }
                n += 1;
            }
            std::mem::swap(&mut self.u, &mut self.acc);
        }
    }

    fn kill(&mut self, i: usize) {
        self.u[i] = 0.0;
        let total = self.sum();
        if total > 0.0 {
            if total < 1e-100 {
                for &j in &self.grid.active {
                    self.u[j] /= total;
                }
                self.log_scale += total.ln();
            }
        } else {
            self.dead = true;
        }
    }

    fn record(&mut self, t: f64, pin: bool) -> f64 {
        if self.dead {
            return f64::NEG_INFINITY;
        }
        if pin {
            self.propagate_to(t);
            self.log_scale + self.u[self.grid.center()].ln()
        } else {
            // the kernel conserves mass, so the total is current without propagating
            self.log_scale + self.sum().ln()
        }
    }
}

/// `log S(t)` (or `log S̃(t)` when `pin`) for each requested time, exact up to
/// the window cut and series truncation. `-inf` means survival is impossible.
pub fn log_survival(env: &mut Environment, kappa: f64, times: &[f64], pin: bool) -> Result<Vec<f64>> {
    if !(kappa >= 0.0 && kappa.is_finite()) {
        return Err(invalid("kappa", format!("must be finite and >= 0, got {kappa}")));
    }
    if times.iter().any(|&t| !(t >= 0.0 && t.is_finite())) {
        return Err(invalid("t", "times must be finite and >= 0"));
    }
    if times.is_empty() {
        return Ok(Vec::new());
    }
    let d = env.dimension();
    let rate = env.field().rate();
    let t_max = times.iter().cloned().fold(0.0, f64::max);
    let budget = 3.0 * rate * t_max + 40.0;
    let radius = window_radius(kappa * t_max / d as f64, d, budget, 0);
    let grid = Grid::new(d, radius)?;
    let n = grid.len();

    let mut kills: Vec<(f64, usize)> = Vec::new();
    if rate > 0.0 {
        let r = radius as i32;
        let mut coords = vec![-r; d];
        loop {
            let site = Site::new(&coords)?;
            let idx = grid.index_of(&site);
            for s in env.disasters_in_window(&site, 0.0, t_max)? {
                kills.push((s, idx));
            }
            let mut k = 0;
            while k < d {
                coords[k] += 1;
                if coords[k] <= r {
                    break;
                }
                coords[k] = -r;
                k += 1;
            }
            if k == d {
                break;
            }
        }
    }
    kills.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));

    let center = grid.center();
    let mut solver = Solver {
        grid,
        u: vec![0.0; n],
        v: vec![0.0; n],
        tmp: vec![0.0; n],
        acc: vec![0.0; n],
        log_scale: 0.0,
        dead: false,
        kappa,
        d,
        budget,
        now: 0.0,
    };
    solver.u[center] = 1.0;

    let mut out = vec![f64::NEG_INFINITY; times.len()];
    let mut next = 0;
    for &(s, i) in &kills {
        while next < order.len() && times[order[next]] <= s {
            out[order[next]] = solver.record(times[order[next]], pin);
            next += 1;
        }
        if next == order.len() || solver.dead {
            break;
        }
        solver.grow_to(s);
        if !solver.grid.in_active(i) {
            continue;
        }
        solver.propagate_to(s);
        solver.kill(i);
    }
    while next < order.len() {
        out[order[next]] = solver.record(times[order[next]], pin);
        next += 1;
    }
    Ok(out)
}
