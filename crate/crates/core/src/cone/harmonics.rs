use std::f64::consts::PI;

/// Orthonormal real spherical harmonic of degree l ≤ 3 and order m, as a homogeneous
/// polynomial in (x, y, z); on the unit sphere it has unit L² norm.
pub fn real_spherical_harmonic(l: usize, m: i32, u: &[f64; 3]) -> f64 {
    let (x, y, z) = (u[0], u[1], u[2]);
    let r2 = x * x + y * y + z * z;
    match (l, m) {
        (0, 0) => 0.5 / PI.sqrt(),
        (1, -1) => (3.0 / (4.0 * PI)).sqrt() * y,
        (1, 0) => (3.0 / (4.0 * PI)).sqrt() * z,
        (1, 1) => (3.0 / (4.0 * PI)).sqrt() * x,
        (2, -2) => 0.5 * (15.0 / PI).sqrt() * x * y,
        (2, -1) => 0.5 * (15.0 / PI).sqrt() * y * z,
        (2, 0) => 0.25 * (5.0 / PI).sqrt() * (3.0 * z * z - r2),
        (2, 1) => 0.5 * (15.0 / PI).sqrt() * x * z,
        (2, 2) => 0.25 * (15.0 / PI).sqrt() * (x * x - y * y),
        (3, -3) => 0.25 * (35.0 / (2.0 * PI)).sqrt() * y * (3.0 * x * x - y * y),
        (3, -2) => 0.5 * (105.0 / PI).sqrt() * x * y * z,
        (3, -1) => 0.25 * (21.0 / (2.0 * PI)).sqrt() * y * (5.0 * z * z - r2),
        (3, 0) => 0.25 * (7.0 / PI).sqrt() * z * (5.0 * z * z - 3.0 * r2),
        (3, 1) => 0.25 * (21.0 / (2.0 * PI)).sqrt() * x * (5.0 * z * z - r2),
        (3, 2) => 0.25 * (105.0 / PI).sqrt() * z * (x * x - y * y),
        (3, 3) => 0.25 * (35.0 / (2.0 * PI)).sqrt() * x * (x * x - 3.0 * y * y),
        _ => panic!("spherical harmonics are tabulated up to degree 3"),
    }
}
