//! Polynomial blend profiles shared by the mapping and extension modules.

/// Quintic smoothstep: 0 at s<=0, 1 at s>=1, C^2 across the endpoints
/// (first and second derivatives vanish there).
pub fn smoothstep(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s >= 1.0 {
        1.0
    } else {
        s * s * s * (10.0 + s * (-15.0 + 6.0 * s))
    }
}

/// Ramp of `smoothstep` over [a, b].
pub fn ramp(x: f64, a: f64, b: f64) -> f64 {
    smoothstep((x - a) / (b - a))
}

/// Plateau profile: 0 below `a`, rises to 1 on [a, b], stays 1 on [b, c],
/// falls back to 0 on [c, d].
pub fn plateau(x: f64, a: f64, b: f64, c: f64, d: f64) -> f64 {
    ramp(x, a, b) * (1.0 - ramp(x, c, d))
}

/// Degree-9 smootherstep: 0 at s<=0, 1 at s>=1, C^4 across the endpoints.
/// Used by manufactured-solution tests that difference the profile twice.
pub fn smootherstep4(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s >= 1.0 {
        1.0
    } else {
        let s5 = s * s * s * s * s;
        s5 * (126.0 + s * (-420.0 + s * (540.0 + s * (-315.0 + 70.0 * s))))
    }
}

/// First derivative of `smootherstep4`.
pub fn smootherstep4_d1(s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        0.0
    } else {
        let s4 = s * s * s * s;
        s4 * (630.0 + s * (-2520.0 + s * (3780.0 + s * (-2520.0 + 630.0 * s))))
    }
}

/// Second derivative of `smootherstep4`.
pub fn smootherstep4_d2(s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        0.0
    } else {
        let s3 = s * s * s;
        s3 * (2520.0 + s * (-12600.0 + s * (22680.0 + s * (-17640.0 + 5040.0 * s))))
    }
}
