use super::{KineticsError, Matrix7, Populations, RateMatrix, Vector7};

// Alexander's three-stage, L-stable, stiffly accurate SDIRK of order 3.
const GAMMA: f64 = 0.435_866_521_508_458_999_416_019_451_193_556_843;
const ORDER: i32 = 3;

fn tableau() -> ([[f64; 3]; 3], [f64; 3]) {
    let g = GAMMA;
    let b1 = -(6.0 * g * g - 16.0 * g + 1.0) / 4.0;
    let b2 = (6.0 * g * g - 20.0 * g + 5.0) / 4.0;
    let a = [[g, 0.0, 0.0], [(1.0 - g) / 2.0, g, 0.0], [b1, b2, g]];
    (a, [b1, b2, g])
}

/// Adaptive implicit integrator for `dp/dt = m · p`.
///
/// Error is estimated by step doubling; both half-steps are kept on
/// acceptance.
#[derive(Debug, Clone, Copy)]
pub struct Integrator {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Integrator {
    fn default() -> Self {
        Integrator {
            rtol: 1e-9,
            atol: 1e-12,
            max_steps: 2_000_000,
        }
    }
}

struct Stepper<'a> {
    m: &'a Matrix7,
    a: [[f64; 3]; 3],
    b: [f64; 3],
}

impl Stepper<'_> {
    fn step(&self, y: &Vector7, h: f64) -> Option<Vector7> {
        let lhs = Matrix7::identity() - self.m * (h * GAMMA);
        let lu = lhs.lu();
        let mut k = [Vector7::zeros(); 3];
        for i in 0..3 {
            let mut yi = *y;
            for (j, kj) in k.iter().enumerate().take(i) {
                yi += kj * (h * self.a[i][j]);
            }
            k[i] = lu.solve(&(self.m * yi))?;
        }
        let mut out = *y;
        for (bi, ki) in self.b.iter().zip(&k) {
            out += ki * (h * bi);
        }
        Some(out)
    }
}

impl Integrator {
    /// Integrates for `duration` seconds, calling `observe(t, p)` after every
    /// accepted step (and once at t = 0).
    pub fn integrate<F>(
        &self,
        matrix: &RateMatrix,
        initial: &Populations,
        duration: f64,
        mut observe: F,
    ) -> Result<Populations, KineticsError>
    where
        F: FnMut(f64, &Populations),
    {
        if !(duration >= 0.0 && duration.is_finite()) {
            return Err(KineticsError::StepFailure { time: 0.0, step: duration });
        }
        observe(0.0, initial);
        if duration == 0.0 {
            return Ok(*initial);
        }

        let (a, b) = tableau();
        let stepper = Stepper { m: &matrix.m, a, b };
        let scale = matrix.max_abs_entry();
        if scale == 0.0 {
            observe(duration, initial);
            return Ok(*initial);
        }

        let mut y = initial.to_vector();
        let mut t = 0.0;
        let mut h = (1e-3 / scale).min(duration);
        let exponent = -1.0 / f64::from(ORDER + 1);
        let richardson = f64::from(2i32.pow(ORDER as u32) - 1);

        for _ in 0..self.max_steps {
            if t >= duration {
                break;
            }
            let last = t + h >= duration;
            if last {
                h = duration - t;
            }
            let fail = || KineticsError::StepFailure { time: t, step: h };
            let full = stepper.step(&y, h).ok_or_else(fail)?;
            let half = stepper.step(&y, 0.5 * h).ok_or_else(fail)?;
            let fine = stepper.step(&half, 0.5 * h).ok_or_else(fail)?;

            let mut err: f64 = 0.0;
            for i in 0..y.len() {
                let e = (fine[i] - full[i]) / richardson;
                let sc = self.atol + self.rtol * fine[i].abs().max(y[i].abs());
                err = err.max((e / sc).abs());
            }
            if !err.is_finite() {
                return Err(fail());
            }

            if err <= 1.0 {
                t = if last { duration } else { t + h };
                y = fine;
                observe(t, &Populations::from_vector(&y));
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(exponent)).clamp(0.2, 5.0)
            };
            h *= factor;
            if h < f64::EPSILON * t.max(1e-300) {
                return Err(KineticsError::StepFailure { time: t, step: h });
            }
        }
        if t < duration {
            return Err(KineticsError::StepFailure { time: t, step: h });
        }
        Ok(Populations::from_vector(&y))
    }
}

/// Integrates `dp/dt = m · p` from `initial` for `duration` seconds with
/// default tolerances.
pub fn evolve(
    matrix: &RateMatrix,
    initial: &Populations,
    duration: f64,
) -> Result<Populations, KineticsError> {
    Integrator::default().integrate(matrix, initial, duration, |_, _| {})
}
