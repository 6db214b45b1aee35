//! Direction-of-arrival conversions between azimuth/elevation (degrees) and
//! Cartesian unit vectors.

pub type Vec3 = [f64; 3];

/// `x = cos el cos az`, `y = cos el sin az`, `z = sin el`.
pub fn to_cartesian(azimuth_deg: f64, elevation_deg: f64) -> Vec3 {
    let (az, el) = (azimuth_deg.to_radians(), elevation_deg.to_radians());
    [el.cos() * az.cos(), el.cos() * az.sin(), el.sin()]
}

pub fn norm(v: Vec3) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

pub fn dot(u: Vec3, v: Vec3) -> f64 {
    u[0] * v[0] + u[1] * v[1] + u[2] * v[2]
}

/// Azimuth in (-180, 180] and elevation in [-90, 90], both in degrees.
///
/// Returns `None` for the zero vector.
pub fn to_spherical(v: Vec3) -> Option<(f64, f64)> {
    let n = norm(v);
    if n == 0.0 || !n.is_finite() {
        return None;
    }
    let mut az = v[1].atan2(v[0]).to_degrees();
    if az <= -180.0 {
        az += 360.0;
    }
    let el = (v[2] / n).clamp(-1.0, 1.0).asin().to_degrees();
    Some((az, el))
}
