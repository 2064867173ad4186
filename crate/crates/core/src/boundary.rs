//! Periodic and Lees–Edwards (sliding brick) boundary conditions.
//!
//! The primary box is a cube of edge `L` centred at the origin, so wrapped
//! coordinates lie in `[-L/2, L/2)`. Under shear, the image box one period
//! above (`+L` in y) slides in `+x` by `le_offset` and moves with velocity
//! `+κL` in x. Only y-crossings carry the x-shift; z stays plain periodic.

use nalgebra::Vector3;

use crate::error::{DpdError, Result};
use crate::model::SystemState;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimBox {
    edge: f64,
    shear_rate: f64,
    le_offset: f64,
}

impl SimBox {
    pub fn periodic(edge: f64) -> Result<Self> {
        Self::sheared(edge, 0.0)
    }

    pub fn sheared(edge: f64, shear_rate: f64) -> Result<Self> {
        if !(edge.is_finite() && edge > 0.0) {
            return Err(DpdError::Config(format!("box edge must be positive, got {edge}")));
        }
        if !shear_rate.is_finite() {
            return Err(DpdError::Config("shear rate must be finite".into()));
        }
        Ok(Self { edge, shear_rate, le_offset: 0.0 })
    }

    /// Cubic box holding `n` particles at number density `density`.
    pub fn for_density(n: usize, density: f64, shear_rate: f64) -> Result<Self> {
        if !(density > 0.0) {
            return Err(DpdError::Config(format!("density must be positive, got {density}")));
        }
        Self::sheared((n as f64 / density).cbrt(), shear_rate)
    }

    pub fn edge(&self) -> f64 {
        self.edge
    }

    pub fn volume(&self) -> f64 {
        self.edge * self.edge * self.edge
    }

    pub fn shear_rate(&self) -> f64 {
        self.shear_rate
    }

    pub fn le_offset(&self) -> f64 {
        self.le_offset
    }

    pub fn is_sheared(&self) -> bool {
        self.shear_rate != 0.0
    }

    /// Sliding speed of the image brick one period above the primary box.
    pub fn brick_velocity(&self) -> f64 {
        self.shear_rate * self.edge
    }

    pub fn with_offset(mut self, offset: f64) -> Self {
        self.le_offset = offset.rem_euclid(self.edge);
        if self.le_offset >= self.edge {
            self.le_offset = 0.0;
        }
        self
    }

    /// Advances the image offset by `κ L dt`, kept in `[0, L)`.
    pub fn advance_offset(&mut self, dt: f64) {
        if self.shear_rate == 0.0 {
            return;
        }
        *self = self.with_offset(self.le_offset + self.brick_velocity() * dt);
    }
}

/// Wraps a scalar into `[-L/2, L/2)`.
#[inline(always)]
pub(crate) fn wrap_scalar(x: f64, l: f64) -> f64 {
    let half = 0.5 * l;
    // Differences of wrapped coordinates need at most one shift.
    if (-half..half).contains(&x) {
        return x;
    }
    if (half..l + half).contains(&x) {
        return x - l;
    }
    if (-l - half..-half).contains(&x) {
        return x + l;
    }
    let mut w = x - l * (x / l + 0.5).floor();
    if w >= half {
        w -= l;
    } else if w < -half {
        w += l;
    }
    w
}

/// Plain periodic minimum image; components land in `[-L/2, L/2)`.
#[inline]
pub fn minimum_image(dq: Vector3<f64>, sim_box: &SimBox) -> Vector3<f64> {
    let l = sim_box.edge;
    Vector3::new(wrap_scalar(dq.x, l), wrap_scalar(dq.y, l), wrap_scalar(dq.z, l))
}

/// Sheared minimum image of `q_i - q_j`.
///
/// Returns the separation and the y-image index of `j` that was used: `+1`
/// means the image one box above `j` (shifted by `+L e_y` and `+offset e_x`).
#[inline]
pub fn le_minimum_image(q_i: &Vector3<f64>, q_j: &Vector3<f64>, sim_box: &SimBox) -> (Vector3<f64>, i8) {
    let l = sim_box.edge;
    let dq = q_i - q_j;
    let dy = wrap_scalar(dq.y, l);
    let shift = dq.y - dy;
    let crossing = if shift > 0.5 * l {
        1
    } else if shift < -0.5 * l {
        -1
    } else {
        0
    };
    let dx = if crossing == 0 {
        dq.x
    } else {
        dq.x - f64::from(crossing) * sim_box.le_offset
    };
    (Vector3::new(wrap_scalar(dx, l), dy, wrap_scalar(dq.z, l)), crossing)
}

/// Relative velocity of `i` with respect to the image of `j` selected by `crossing`.
#[inline]
pub fn le_relative_velocity(
    p_i: &Vector3<f64>,
    p_j: &Vector3<f64>,
    m_i: f64,
    m_j: f64,
    crossing: i8,
    sim_box: &SimBox,
) -> Vector3<f64> {
    let mut v = p_i / m_i - p_j / m_j;
    if crossing != 0 {
        v.x -= f64::from(crossing) * sim_box.brick_velocity();
    }
    v
}

/// Streaming velocity `κ (q·e_y) e_x` of the imposed Couette profile.
#[inline]
pub fn streaming_velocity(q: &Vector3<f64>, sim_box: &SimBox) -> Vector3<f64> {
    Vector3::new(sim_box.shear_rate * q.y, 0.0, 0.0)
}

/// Wraps every particle into the primary box.
///
/// A particle leaving through `+y` re-enters at the bottom shifted by
/// `-offset` in x and with `p_x` reduced by `m κ L`; the reverse applies at
/// `-y`. Returns the net number of `+y` exits minus `-y` exits.
pub fn le_wrap(state: &mut SystemState, sim_box: &SimBox) -> i64 {
    let l = sim_box.edge;
    let half = 0.5 * l;
    let mut net = 0i64;
    for ((q, p), &m) in state.positions.iter_mut().zip(state.momenta.iter_mut()).zip(&state.masses) {
        let y = wrap_scalar(q.y, l);
        let images = ((q.y - y) / l).round();
        if images != 0.0 {
            q.y = y;
            if sim_box.shear_rate != 0.0 {
                q.x -= images * sim_box.le_offset;
                p.x -= images * m * sim_box.brick_velocity();
            }
            net += images as i64;
        }
        if q.x < -half || q.x >= half {
            q.x = wrap_scalar(q.x, l);
        }
        if q.z < -half || q.z >= half {
            q.z = wrap_scalar(q.z, l);
        }
    }
    net
}
