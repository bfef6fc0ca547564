//! Planar curve geometry: Fresnel integrals, clothoids, circular arcs,
//! bicycle-model kinematics, and trajectory construction from a
//! (path, velocity-profile) pair.
//!
//! All curves are arc-length parameterized. A clothoid is evaluated in its
//! scaled canonical form `p(xi) = p0 + a*(C(xi/a)*T0 + S(xi/a)*N0)` where
//! `C`/`S` are the Fresnel integrals with the pi/2 phase convention:
//!
//! ```text
//! C(x) = integral 0..x of cos(pi u^2 / 2) du
//! S(x) = integral 0..x of sin(pi u^2 / 2) du
//! ```

use crate::scalar::Real;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("non-finite input to {0}")]
    NonFinite(&'static str),
    #[error("steering angle {0} rad outside (-pi/2, pi/2)")]
    SteeringOutOfRange(f64),
    #[error("wheelbase must be positive, got {0}")]
    NonPositiveWheelbase(f64),
    #[error("clothoid start offset {offset:.3} m exceeds arc budget {budget:.3} m")]
    ArcBudgetExceeded { offset: f64, budget: f64 },
    #[error("invalid path spec: {0}")]
    InvalidPathSpec(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
}

/// Normalize an angle into (-pi, pi].
pub fn normalize_angle<S: Real>(a: S) -> S {
    let pi = S::PI();
    let two_pi = pi + pi;
    let mut x = a % two_pi;
    if x <= -pi {
        x += two_pi;
    } else if x > pi {
        x -= two_pi;
    }
    x
}

/// Planar pose. `heading` is kept normalized to (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2<S> {
    pub x: S,
    pub y: S,
    pub heading: S,
}

impl<S: Real> Pose2<S> {
    pub fn new(x: S, y: S, heading: S) -> Self {
        Pose2 {
            x,
            y,
            heading: normalize_angle(heading),
        }
    }

    pub fn origin() -> Self {
        Pose2 {
            x: S::zero(),
            y: S::zero(),
            heading: S::zero(),
        }
    }

    pub fn position(&self) -> (S, S) {
        (self.x, self.y)
    }

    pub fn distance(&self, other: &Pose2<S>) -> S {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }

    /// Map a point given in this pose's local frame into the parent frame.
    pub fn local_to_parent(&self, x: S, y: S) -> (S, S) {
        let (sin, cos) = self.heading.sin_cos();
        (self.x + cos * x - sin * y, self.y + sin * x + cos * y)
    }

    /// Map a parent-frame point into this pose's local frame.
    pub fn parent_to_local(&self, x: S, y: S) -> (S, S) {
        let (sin, cos) = self.heading.sin_cos();
        let dx = x - self.x;
        let dy = y - self.y;
        (cos * dx + sin * dy, -sin * dx + cos * dy)
    }
}

/// Self-driving-vehicle state at planning time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdvState<S> {
    pub pose: Pose2<S>,
    /// Forward speed, >= 0.
    pub velocity: S,
    pub steering_angle: S,
    pub wheelbase: S,
}

impl<S: Real> SdvState<S> {
    /// Path curvature implied by the current steering angle.
    pub fn curvature(&self) -> Result<S, GeometryError> {
        curvature_from_steering(self.steering_angle, self.wheelbase)
    }
}

/// Geometric path family for sampled trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum PathSpec<S> {
    Straight,
    /// Signed radius; positive turns left (heading increases).
    Circle { radius: S },
    /// Scaled canonical clothoid. `start_arc_offset` (>= 0) is the arc
    /// position on the canonical curve matched to the SDV pose; `flipped`
    /// mirrors the normal so initial curvature may take either sign.
    Clothoid {
        scale_a: S,
        flipped: bool,
        start_arc_offset: S,
    },
}

impl<S: Real> PathSpec<S> {
    pub fn kind_name(&self) -> &'static str {
        match self {
            PathSpec::Straight => "straight",
            PathSpec::Circle { .. } => "circle",
            PathSpec::Clothoid { .. } => "clothoid",
        }
    }

    fn validate(&self) -> Result<(), GeometryError> {
        match self {
            PathSpec::Straight => Ok(()),
            PathSpec::Circle { radius } => {
                if *radius == S::zero() || !radius.is_finite() {
                    Err(GeometryError::InvalidPathSpec("circle radius must be nonzero"))
                } else {
                    Ok(())
                }
            }
            PathSpec::Clothoid {
                scale_a,
                start_arc_offset,
                ..
            } => {
                if *scale_a <= S::zero() || !scale_a.is_finite() {
                    Err(GeometryError::InvalidPathSpec("clothoid scale must be positive"))
                } else if *start_arc_offset < S::zero() || !start_arc_offset.is_finite() {
                    Err(GeometryError::InvalidPathSpec(
                        "clothoid start offset must be nonnegative",
                    ))
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// Constant-acceleration speed profile, floored at zero (no reverse).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityProfile<S> {
    pub initial_velocity: S,
    pub acceleration: S,
}

/// A planned or demonstrated motion: `T` waypoints at fixed timestep `dt`,
/// waypoint `t` at time `(t+1)*dt` ahead of the start state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<S> {
    pub waypoints: Vec<Waypoint<S>>,
    pub dt: S,
    /// Set when any waypoint leaves the configured spatial bound. The
    /// trajectory is still usable; the planner masks costs outside the ROI.
    #[serde(default)]
    pub out_of_bounds: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint<S> {
    pub pose: Pose2<S>,
    pub velocity: S,
}

impl<S: Real> Trajectory<S> {
    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    /// Time of waypoint `t` relative to the start state.
    pub fn time_of(&self, index: usize) -> S {
        S::from_usize(index + 1).unwrap() * self.dt
    }
}

// ---------------------------------------------------------------------------
// Fresnel integrals
// ---------------------------------------------------------------------------

/// Fresnel integrals (C(x), S(x)) with the pi/2 phase convention.
///
/// Evaluated internally in double precision: a Maclaurin series up to
/// |x| <= 1.6, rational approximations of the auxiliary functions f, g on
/// (1.6, 6) (coefficients after W. J. Thompson, "Atlas for Computing
/// Mathematical Functions", Wiley 1997), and the asymptotic expansions of
/// f, g beyond.
pub fn fresnel<S: Real>(x: S) -> Result<(S, S), GeometryError> {
    if !x.is_finite() {
        return Err(GeometryError::NonFinite("fresnel"));
    }
    let (c, s) = fresnel_cs(x.as_f64());
    Ok((S::of(c), S::of(s)))
}

const SERIES_CUTOFF: f64 = 1.6;
const ASYMPTOTIC_CUTOFF: f64 = 6.0;

/// Numerators/denominators of the rational fits to the auxiliary functions
/// f(x), g(x) where C = 1/2 + f sin(u) - g cos(u), S = 1/2 - f cos(u) - g sin(u),
/// u = pi x^2 / 2. Valid on [1, 6].
const AUX_F_NUM: [f64; 11] = [
    0.499_999_880_858_847_33,
    1.351_117_779_121_071_5,
    1.317_540_783_616_865_9,
    1.186_114_930_029_385_5,
    0.770_962_729_888_834_7,
    0.417_387_433_878_796_4,
    0.190_442_027_052_729_04,
    0.066_559_988_966_276_98,
    0.022_789_258_616_785_717,
    0.004_011_668_935_850_794,
    0.001_219_203_685_124_988_4,
];
const AUX_F_DEN: [f64; 12] = [
    1.0,
    2.702_230_577_240_026,
    4.205_926_815_143_849,
    4.522_188_284_010_771_5,
    3.724_035_228_163_036,
    2.458_928_625_467_815_3,
    1.312_549_162_944_370_3,
    0.599_768_572_012_093_3,
    0.209_076_807_503_788_5,
    0.071_596_216_346_579_01,
    0.012_602_969_513_793_714,
    0.003_830_242_351_293_125,
];
const AUX_G_NUM: [f64; 11] = [
    0.500_000_143_927_063_45,
    0.032_346_434_925_349_13,
    0.176_193_251_578_632_54,
    0.038_606_273_170_706_486,
    0.023_693_692_309_257_725,
    0.007_092_018_516_845_034,
    0.001_249_212_321_241_208_7,
    0.000_440_230_408_947_784_7,
    -8.802_668_274_761_725e-6,
    -1.403_355_491_658_002e-8,
    2.350_922_178_215_547_4e-10,
];
const AUX_G_DEN: [f64; 12] = [
    1.0,
    2.064_698_749_701_96,
    2.910_931_176_694_803,
    2.656_193_675_133_303,
    2.019_556_398_317_727,
    1.116_789_112_918_936_4,
    0.572_678_747_559_731_7,
    0.194_084_811_695_930_71,
    0.076_348_083_414_312_49,
    0.011_573_247_407_207_866,
    0.004_409_927_369_306_731,
    -9.070_958_410_429_993e-5,
];

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

pub(crate) fn fresnel_cs(x: f64) -> (f64, f64) {
    let ax = x.abs();
    let (mut c, mut s) = if ax <= SERIES_CUTOFF {
        fresnel_series(ax)
    } else if ax < ASYMPTOTIC_CUTOFF {
        let f = horner(&AUX_F_NUM, ax) / horner(&AUX_F_DEN, ax);
        let g = horner(&AUX_G_NUM, ax) / horner(&AUX_G_DEN, ax);
        fresnel_from_aux(ax, f, g)
    } else {
        let (f, g) = fresnel_aux_asymptotic(ax);
        fresnel_from_aux(ax, f, g)
    };
    if x < 0.0 {
        c = -c;
        s = -s;
    }
    (c, s)
}

/// Alternating Maclaurin series; converges quickly for |x| <= 1.6.
fn fresnel_series(x: f64) -> (f64, f64) {
    let u = std::f64::consts::FRAC_PI_2 * x * x;
    let t = -(u * u);

    // C(x)/x = sum over n of t^n / ((2n)! (4n+1))
    let mut term = 1.0;
    let mut fact = 1.0;
    let mut two_n = 0.0;
    let mut den = 1.0;
    let mut sum_c = 1.0;
    loop {
        two_n += 2.0;
        fact *= two_n * (two_n - 1.0);
        den += 4.0;
        term *= t;
        let contrib = term / (fact * den);
        sum_c += contrib;
        if contrib.abs() <= 1e-17 * sum_c.abs() {
            break;
        }
    }

    // S(x)/(u*x) = sum over n of t^n / ((2n+1)! (4n+3))
    let mut term = 1.0;
    let mut fact = 1.0;
    let mut two_n = 1.0;
    let mut den = 3.0;
    let mut sum_s = 1.0 / 3.0;
    loop {
        two_n += 2.0;
        fact *= two_n * (two_n - 1.0);
        den += 4.0;
        term *= t;
        let contrib = term / (fact * den);
        sum_s += contrib;
        if contrib.abs() <= 1e-17 * sum_s.abs() {
            break;
        }
    }

    (x * sum_c, u * x * sum_s)
}

/// Divergent asymptotic expansions of f and g, truncated at the smallest
/// term; plenty of accuracy for x >= 6.
fn fresnel_aux_asymptotic(x: f64) -> (f64, f64) {
    let s = std::f64::consts::PI * x * x;
    let t = -1.0 / (s * s);

    let mut num = -1.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    loop {
        num += 4.0;
        term *= num * (num - 2.0) * t;
        sum += term;
        if term.abs() <= 1e-16 * sum.abs() {
            break;
        }
    }
    let f = sum / (std::f64::consts::PI * x);

    let mut num = -1.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    loop {
        num += 4.0;
        term *= num * (num + 2.0) * t;
        sum += term;
        if term.abs() <= 1e-16 * sum.abs() {
            break;
        }
    }
    let pix = std::f64::consts::PI * x;
    let g = sum / (pix * pix * x);

    (f, g)
}

fn fresnel_from_aux(x: f64, f: f64, g: f64) -> (f64, f64) {
    let u = std::f64::consts::FRAC_PI_2 * x * x;
    let (sin_u, cos_u) = u.sin_cos();
    (
        0.5 + f * sin_u - g * cos_u,
        0.5 - f * cos_u - g * sin_u,
    )
}

// ---------------------------------------------------------------------------
// Bicycle model
// ---------------------------------------------------------------------------

/// Path curvature of a kinematic bicycle: kappa = 2 tan(steering) / wheelbase.
pub fn curvature_from_steering<S: Real>(steering: S, wheelbase: S) -> Result<S, GeometryError> {
    if !steering.is_finite() || !wheelbase.is_finite() {
        return Err(GeometryError::NonFinite("curvature_from_steering"));
    }
    if wheelbase <= S::zero() {
        return Err(GeometryError::NonPositiveWheelbase(wheelbase.as_f64()));
    }
    if steering.abs() >= S::FRAC_PI_2() {
        return Err(GeometryError::SteeringOutOfRange(steering.as_f64()));
    }
    Ok(S::of(2.0) * steering.tan() / wheelbase)
}

// ---------------------------------------------------------------------------
// Path evaluation
// ---------------------------------------------------------------------------

/// Pose after driving `arc_length` meters along the path from `start`.
pub fn path_point<S: Real>(
    spec: &PathSpec<S>,
    start: &Pose2<S>,
    arc_length: S,
) -> Result<Pose2<S>, GeometryError> {
    spec.validate()?;
    if !arc_length.is_finite() {
        return Err(GeometryError::NonFinite("path_point"));
    }
    match spec {
        PathSpec::Straight => {
            let (sin, cos) = start.heading.sin_cos();
            Ok(Pose2 {
                x: start.x + arc_length * cos,
                y: start.y + arc_length * sin,
                heading: start.heading,
            })
        }
        PathSpec::Circle { radius } => {
            let h0 = start.heading;
            let h1 = h0 + arc_length / *radius;
            let (sin0, cos0) = h0.sin_cos();
            let (sin1, cos1) = h1.sin_cos();
            Ok(Pose2 {
                x: start.x + *radius * (sin1 - sin0),
                y: start.y - *radius * (cos1 - cos0),
                heading: normalize_angle(h1),
            })
        }
        PathSpec::Clothoid {
            scale_a,
            flipped,
            start_arc_offset,
        } => Ok(clothoid_point_impl(
            scale_a.as_f64(),
            *flipped,
            start_arc_offset.as_f64(),
            start,
            arc_length.as_f64(),
        )),
    }
}

/// Clothoid evaluation per the scaled canonical form. `arc_length` is
/// measured from the curve point matched to the SDV pose (`start`).
pub fn clothoid_point<S: Real>(
    spec: &PathSpec<S>,
    start: &Pose2<S>,
    arc_length: S,
) -> Result<Pose2<S>, GeometryError> {
    match spec {
        PathSpec::Clothoid { .. } => path_point(spec, start, arc_length),
        _ => Err(GeometryError::InvalidPathSpec("clothoid_point wants a clothoid")),
    }
}

fn clothoid_point_impl<S: Real>(
    scale: f64,
    flipped: bool,
    offset: f64,
    start: &Pose2<S>,
    arc: f64,
) -> Pose2<S> {
    let sigma = if flipped { -1.0 } else { 1.0 };
    let xi = offset + arc;
    let (c0, s0) = fresnel_cs(offset / scale);
    let (c1, s1) = fresnel_cs(xi / scale);
    let dx = scale * (c1 - c0);
    let dy = sigma * scale * (s1 - s0);

    // Tangent angle of the canonical (possibly mirrored) curve at the
    // matched point; the world rotation cancels it so the curve tangent
    // there equals start.heading.
    let half = std::f64::consts::PI / (2.0 * scale * scale);
    let theta0 = sigma * half * offset * offset;
    let rot = start.heading.as_f64() - theta0;
    let (sin_r, cos_r) = rot.sin_cos();

    let heading = start.heading.as_f64() + sigma * half * (xi * xi - offset * offset);
    Pose2 {
        x: start.x + S::of(cos_r * dx - sin_r * dy),
        y: start.y + S::of(sin_r * dx + cos_r * dy),
        heading: normalize_angle(S::of(heading)),
    }
}

/// Curvature of the scaled clothoid at arc position `arc_length` from the
/// matched point: sigma * pi * (offset + arc) / a^2.
pub fn clothoid_curvature<S: Real>(spec: &PathSpec<S>, arc_length: S) -> Result<S, GeometryError> {
    match spec {
        PathSpec::Clothoid {
            scale_a,
            flipped,
            start_arc_offset,
        } => {
            let sigma = if *flipped { -S::one() } else { S::one() };
            let xi = *start_arc_offset + arc_length;
            Ok(sigma * S::PI() * xi / (*scale_a * *scale_a))
        }
        _ => Err(GeometryError::InvalidPathSpec("clothoid_curvature wants a clothoid")),
    }
}

/// Arc position on the canonical curve whose curvature magnitude matches the
/// SDV's initial curvature: xi0 = |kappa0| a^2 / pi. The curvature sign is
/// carried by the `flipped` flag, so the offset is always nonnegative.
///
/// Offsets beyond `max_offset` reject the spec (the sampler retries with a
/// fresh scale).
pub fn match_initial_curvature<S: Real>(
    spec: &PathSpec<S>,
    state: &SdvState<S>,
    max_offset: S,
) -> Result<S, GeometryError> {
    let scale = match spec {
        PathSpec::Clothoid { scale_a, .. } => *scale_a,
        _ => {
            return Err(GeometryError::InvalidPathSpec(
                "match_initial_curvature wants a clothoid",
            ))
        }
    };
    let kappa = state.curvature()?;
    let offset = kappa.abs() * scale * scale / S::PI();
    if offset > max_offset {
        return Err(GeometryError::ArcBudgetExceeded {
            offset: offset.as_f64(),
            budget: max_offset.as_f64(),
        });
    }
    Ok(offset)
}

// ---------------------------------------------------------------------------
// Velocity profile
// ---------------------------------------------------------------------------

/// Speed at time `t`, floored at zero.
pub fn profile_speed<S: Real>(profile: &VelocityProfile<S>, t: S) -> S {
    (profile.initial_velocity + profile.acceleration * t).max(S::zero())
}

/// Distance traveled by time `t` under the clamped profile. Once speed hits
/// zero under deceleration it stays zero.
pub fn profile_arc_length<S: Real>(profile: &VelocityProfile<S>, t: S) -> S {
    assert!(t >= S::zero(), "profile_arc_length wants t >= 0");
    let v0 = profile.initial_velocity.max(S::zero());
    let a = profile.acceleration;
    let half = S::of(0.5);
    if a >= S::zero() || v0 + a * t >= S::zero() {
        return v0 * t + half * a * t * t;
    }
    // Decelerating to a stop inside [0, t].
    let t_stop = -v0 / a;
    v0 * t_stop + half * a * t_stop * t_stop
}

// ---------------------------------------------------------------------------
// Trajectory construction
// ---------------------------------------------------------------------------

/// Build a trajectory of `t_steps` waypoints at timestep `dt`, waypoint `t`
/// at arc length `profile_arc_length(profile, (t+1)*dt)` along the path.
///
/// A waypoint farther than `spatial_bound` from the start pose flags the
/// trajectory (`out_of_bounds`) without rejecting it.
pub fn build_trajectory<S: Real>(
    spec: &PathSpec<S>,
    profile: &VelocityProfile<S>,
    state: &SdvState<S>,
    t_steps: usize,
    dt: S,
    spatial_bound: Option<S>,
) -> Result<Trajectory<S>, GeometryError> {
    if t_steps == 0 {
        return Err(GeometryError::InvalidArgument("t_steps must be >= 1"));
    }
    if dt <= S::zero() || !dt.is_finite() {
        return Err(GeometryError::InvalidArgument("dt must be positive"));
    }
    spec.validate()?;

    let mut waypoints = Vec::with_capacity(t_steps);
    let mut out_of_bounds = false;
    for t in 0..t_steps {
        let time = S::from_usize(t + 1).unwrap() * dt;
        let arc = profile_arc_length(profile, time);
        let pose = path_point(spec, &state.pose, arc)?;
        if let Some(bound) = spatial_bound {
            if pose.distance(&state.pose) > bound {
                out_of_bounds = true;
            }
        }
        waypoints.push(Waypoint {
            pose,
            velocity: profile_speed(profile, time),
        });
    }
    Ok(Trajectory {
        waypoints,
        dt,
        out_of_bounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const EPS: f64 = 1e-12;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn normalize_angle_range() {
        assert_eq!(normalize_angle(0.0_f64), 0.0);
        assert!(close(normalize_angle(3.0 * std::f64::consts::PI), std::f64::consts::PI, EPS));
        // -pi maps to the closed end +pi
        assert!(close(normalize_angle(-std::f64::consts::PI), std::f64::consts::PI, EPS));
        assert!(close(normalize_angle(7.0_f64), 7.0 - 2.0 * std::f64::consts::PI, EPS));
    }

    #[test]
    fn fresnel_trivials() {
        let (c, s) = fresnel(0.0_f64).unwrap();
        assert_eq!((c, s), (0.0, 0.0));
        let (cp, sp) = fresnel(1.0_f64).unwrap();
        let (cn, sn) = fresnel(-1.0_f64).unwrap();
        assert_eq!((cp, sp), (-cn, -sn));
        assert!(fresnel(f64::NAN).is_err());
        assert!(fresnel(f64::INFINITY).is_err());
    }

    #[test]
    fn fresnel_reference_values() {
        // Frozen from the adaptive-quadrature oracle (tests/acceptance.rs).
        let cases = [
            (0.5, 0.4923442258714464, 0.06473243285999929),
            (1.0, 0.7798934003768228, 0.4382591473903548),
            (1.5, 0.4452611760398215, 0.6975049600820930),
            (2.0, 0.4882534060753408, 0.3434156783636982),
            (3.0, 0.6057207892976856, 0.4963129989673750),
            (7.5, 0.5160182501523363, 0.4607012329468306),
        ];
        for (x, c_ref, s_ref) in cases {
            let (c, s) = fresnel(x).unwrap();
            assert!(close(c, c_ref, 1e-9), "C({x}) = {c}, want {c_ref}");
            assert!(close(s, s_ref, 1e-9), "S({x}) = {s}, want {s_ref}");
        }
    }

    #[test]
    fn fresnel_branch_continuity() {
        // The three evaluation regimes must agree at the seams.
        for x in [SERIES_CUTOFF, ASYMPTOTIC_CUTOFF] {
            let below = fresnel_cs(x - 1e-9);
            let above = fresnel_cs(x + 1e-9);
            assert!(close(below.0, above.0, 1e-7));
            assert!(close(below.1, above.1, 1e-7));
        }
    }

    #[test]
    fn curvature_from_steering_cases() {
        assert_eq!(curvature_from_steering(0.0_f64, 2.8).unwrap(), 0.0);
        // Frozen: 2 tan(0.1) / 2.8
        let k = curvature_from_steering(0.1_f64, 2.8).unwrap();
        assert!(close(k, 0.07166762291817896, 1e-15));
        let k_neg = curvature_from_steering(-0.1_f64, 2.8).unwrap();
        assert_eq!(k, -k_neg);
        assert!(curvature_from_steering(std::f64::consts::FRAC_PI_2, 2.8).is_err());
        assert!(curvature_from_steering(0.1_f64, 0.0).is_err());
        assert!(curvature_from_steering(0.1_f64, -1.0).is_err());
    }

    fn unit_clothoid() -> PathSpec<f64> {
        PathSpec::Clothoid {
            scale_a: 1.0,
            flipped: false,
            start_arc_offset: 0.0,
        }
    }

    #[test]
    fn clothoid_point_canonical() {
        let start = Pose2::origin();
        let p = clothoid_point(&unit_clothoid(), &start, 0.0).unwrap();
        assert_eq!(p, start);
        // Unit-scale canonical curve at xi = 1 lands on (C(1), S(1)).
        let p = clothoid_point(&unit_clothoid(), &start, 1.0).unwrap();
        assert!(close(p.x, 0.7798934003768228, 1e-9));
        assert!(close(p.y, 0.4382591473903548, 1e-9));
        assert!(clothoid_point(&PathSpec::Straight, &start, 1.0).is_err());
    }

    #[test]
    fn clothoid_curvature_matches_heading_rate() {
        // kappa = d(heading)/d(arc) by central differences.
        let spec = PathSpec::Clothoid {
            scale_a: 12.0,
            flipped: false,
            start_arc_offset: 4.0,
        };
        let start = Pose2::new(3.0, -2.0, 0.7);
        for arc in [0.0, 2.0, 9.0] {
            let h = 1e-5;
            let ahead = clothoid_point(&spec, &start, arc + h).unwrap();
            let behind = clothoid_point(&spec, &start, arc - h).unwrap();
            let fd = normalize_angle(ahead.heading - behind.heading) / (2.0 * h);
            let analytic = clothoid_curvature(&spec, arc).unwrap();
            assert!(
                close(fd, analytic, 1e-6 * analytic.abs().max(1.0)),
                "arc {arc}: fd {fd} vs analytic {analytic}"
            );
        }
    }

    #[test]
    fn clothoid_flip_mirrors_curvature() {
        let start = Pose2::origin();
        for flipped in [false, true] {
            let spec = PathSpec::Clothoid {
                scale_a: 10.0,
                flipped,
                start_arc_offset: 0.0,
            };
            let p = clothoid_point(&spec, &start, 5.0).unwrap();
            let sign = if flipped { -1.0 } else { 1.0 };
            assert!(p.y * sign > 0.0, "flipped={flipped} bends the wrong way");
            let k = clothoid_curvature(&spec, 5.0).unwrap();
            assert!(k * sign > 0.0);
        }
    }

    fn state_with_curvature(kappa: f64) -> SdvState<f64> {
        // steering = atan(kappa * wheelbase / 2)
        let wheelbase = 2.8;
        SdvState {
            pose: Pose2::origin(),
            velocity: 8.0,
            steering_angle: (kappa * wheelbase / 2.0).atan(),
            wheelbase,
        }
    }

    #[test]
    fn match_initial_curvature_cases() {
        let state0 = state_with_curvature(0.0);
        let spec = PathSpec::Clothoid {
            scale_a: 10.0,
            flipped: false,
            start_arc_offset: 0.0,
        };
        assert_eq!(match_initial_curvature(&spec, &state0, 15.0).unwrap(), 0.0);

        // Frozen: 0.05 * a^2 / pi for a = 10 and a = 20.
        let state = state_with_curvature(0.05);
        let offset = match_initial_curvature(&spec, &state, 15.0).unwrap();
        assert!(close(offset, 1.5915494309189535, 1e-9));
        let spec20 = PathSpec::Clothoid {
            scale_a: 20.0,
            flipped: false,
            start_arc_offset: 0.0,
        };
        let offset = match_initial_curvature(&spec20, &state, 30.0).unwrap();
        assert!(close(offset, 6.366197723675814, 1e-9));

        // Budget rejection.
        assert!(matches!(
            match_initial_curvature(&spec20, &state, 5.0),
            Err(GeometryError::ArcBudgetExceeded { .. })
        ));
    }

    #[test]
    fn matched_clothoid_reproduces_initial_curvature() {
        for kappa in [0.02, -0.07] {
            let state = state_with_curvature(kappa);
            let scale = 15.0;
            let spec_probe = PathSpec::Clothoid {
                scale_a: scale,
                flipped: kappa < 0.0,
                start_arc_offset: 0.0,
            };
            let offset = match_initial_curvature(&spec_probe, &state, 1.5 * scale).unwrap();
            let spec = PathSpec::Clothoid {
                scale_a: scale,
                flipped: kappa < 0.0,
                start_arc_offset: offset,
            };
            let k0 = clothoid_curvature(&spec, 0.0).unwrap();
            assert!(close(k0, kappa, 1e-9), "kappa {kappa} vs matched {k0}");
        }
    }

    #[test]
    fn profile_arc_length_cases() {
        let cruise = VelocityProfile {
            initial_velocity: 10.0,
            acceleration: 0.0,
        };
        assert_eq!(profile_arc_length(&cruise, 3.0), 30.0);

        let accel = VelocityProfile {
            initial_velocity: 10.0,
            acceleration: 2.0,
        };
        assert_eq!(profile_arc_length(&accel, 3.0), 39.0);

        // Stops at t = 0.8 s after v0^2 / (2*5) = 1.6 m.
        let brake = VelocityProfile {
            initial_velocity: 4.0,
            acceleration: -5.0,
        };
        assert!(close(profile_arc_length(&brake, 3.0), 1.6, EPS));
        assert_eq!(profile_speed(&brake, 3.0), 0.0);
        assert_eq!(profile_speed(&brake, 0.5), 1.5);
    }

    fn cruise_state(v: f64) -> SdvState<f64> {
        SdvState {
            pose: Pose2::origin(),
            velocity: v,
            steering_angle: 0.0,
            wheelbase: 2.8,
        }
    }

    #[test]
    fn straight_trajectory_waypoints() {
        let profile = VelocityProfile {
            initial_velocity: 10.0,
            acceleration: 0.0,
        };
        let traj = build_trajectory(
            &PathSpec::Straight,
            &profile,
            &cruise_state(10.0),
            6,
            0.5,
            None,
        )
        .unwrap();
        assert_eq!(traj.len(), 6);
        for (t, wp) in traj.waypoints.iter().enumerate() {
            assert!(close(wp.pose.x, 5.0 * (t + 1) as f64, EPS));
            assert_eq!(wp.pose.y, 0.0);
            assert_eq!(wp.velocity, 10.0);
        }
        assert!(!traj.out_of_bounds);
    }

    #[test]
    fn circle_headings_advance_linearly() {
        let radius = 40.0;
        let v = 8.0;
        let dt = 0.5;
        let profile = VelocityProfile {
            initial_velocity: v,
            acceleration: 0.0,
        };
        let traj = build_trajectory(
            &PathSpec::Circle { radius },
            &profile,
            &cruise_state(v),
            6,
            dt,
            None,
        )
        .unwrap();
        for (t, wp) in traj.waypoints.iter().enumerate() {
            let expect = v * dt * (t + 1) as f64 / radius;
            assert!(close(wp.pose.heading, expect, 1e-12));
        }
    }

    #[test]
    fn trajectory_back_extrapolates_to_start() {
        // Arc length 0 recovers the SDV pose for every family.
        let state = state_with_curvature(0.03);
        let specs = [
            PathSpec::Straight,
            PathSpec::Circle { radius: -25.0 },
            PathSpec::Clothoid {
                scale_a: 14.0,
                flipped: false,
                start_arc_offset: 1.87,
            },
        ];
        for spec in specs {
            let p = path_point(&spec, &state.pose, 0.0).unwrap();
            assert!(p.distance(&state.pose) < 1e-9);
            assert!(close(p.heading, state.pose.heading, 1e-9));
        }
    }

    #[test]
    fn out_of_bound_trajectories_are_flagged_not_rejected() {
        let profile = VelocityProfile {
            initial_velocity: 10.0,
            acceleration: 0.0,
        };
        let traj = build_trajectory(
            &PathSpec::Straight,
            &profile,
            &cruise_state(10.0),
            6,
            0.5,
            Some(12.0),
        )
        .unwrap();
        assert!(traj.out_of_bounds);
        assert_eq!(traj.len(), 6);
    }

    #[test]
    fn build_trajectory_rejects_bad_args() {
        let profile = VelocityProfile {
            initial_velocity: 1.0,
            acceleration: 0.0,
        };
        assert!(build_trajectory(&PathSpec::Straight, &profile, &cruise_state(1.0), 0, 0.5, None).is_err());
        assert!(build_trajectory(&PathSpec::Straight, &profile, &cruise_state(1.0), 3, 0.0, None).is_err());
        assert!(build_trajectory(
            &PathSpec::Circle { radius: 0.0 },
            &profile,
            &cruise_state(1.0),
            3,
            0.5,
            None
        )
        .is_err());
    }
}
