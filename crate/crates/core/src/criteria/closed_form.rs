//! Closed forms for the nearest-neighbour models on Z² with the NW order.

/// Dust rate of each of the two past neighbours under the Ising kernel.
pub fn ising_alpha(beta: f64, h: f64) -> f64 {
    let b2 = 2.0 * beta;
    b2.sinh() / (b2.cosh() + (b2 * (h.abs() - 1.0)).cosh())
}

pub fn ising_gamma(beta: f64, h: f64) -> f64 {
    2.0 * ising_alpha(beta, h)
}

pub fn ising_px(beta: f64, h: f64) -> f64 {
    let a = h.abs();
    0.5 * ((beta * (a + 2.0)).tanh() - (beta * (a - 2.0)).tanh())
}

pub fn stavskaya_alpha(p: f64) -> f64 {
    p
}

pub fn stavskaya_gamma(p: f64) -> f64 {
    2.0 * p
}

pub fn stavskaya_px(p: f64) -> f64 {
    p
}

/// `β` with `p_x(β, 0) = pc`, i.e. `tanh(2β) = pc`.
pub fn ising_dp_boundary_zero_field(pc: f64) -> f64 {
    0.5 * pc.atanh()
}

/// Smallest `β` in `(0, beta_max]` with `g(β) ≥ level`, for `g` increasing
/// below the root. `None` when `g` stays under `level`.
fn first_crossing(g: impl Fn(f64) -> f64, level: f64, beta_max: f64) -> Option<f64> {
    let (mut lo, mut hi) = (0.0, beta_max);
    if g(hi) < level {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < level {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}

/// `β` at which `p_x(β, h)` first reaches `pc`.
pub fn ising_dp_boundary(h: f64, pc: f64) -> Option<f64> {
    first_crossing(|b| ising_px(b, h), pc, 50.0)
}

/// `β` at which `Γ(β, h)` first reaches 1; `None` at `h = 0` where `Γ < 1`.
pub fn ising_dobrushin_boundary(h: f64) -> Option<f64> {
    if h == 0.0 {
        return None;
    }
    first_crossing(|b| ising_gamma(b, h), 1.0, 50.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_field() {
        for beta in [0.1, 0.5, 1.0, 3.0] {
            assert!((ising_gamma(beta, 0.0) - (2.0 * beta).tanh()).abs() < 1e-14);
            assert!((ising_px(beta, 0.0) - (2.0 * beta).tanh()).abs() < 1e-14);
        }
        assert!(ising_dobrushin_boundary(0.0).is_none());
        let b = ising_dp_boundary(0.0, 0.5).unwrap();
        assert!((b - ising_dp_boundary_zero_field(0.5)).abs() < 1e-12);
        assert!((b - 0.274_653_072_167_027_1).abs() < 1e-12);
    }

    #[test]
    fn strong_field() {
        assert!((ising_gamma(2.0, 0.05) - 1.0989).abs() < 1e-4);
        let b = ising_dobrushin_boundary(0.05).unwrap();
        assert!((ising_gamma(b, 0.05) - 1.0).abs() < 1e-9);
        assert!(ising_px(1.0, 0.3) >= ising_alpha(1.0, 0.3));
    }
}
