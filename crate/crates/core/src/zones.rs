//! Class-specific static safety discs and velocity-scaled dynamic sectors.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::geometry::wrap_angle;
use crate::sim::{AgentClass, PedestrianState, RobotState};

/// Length gain of the dynamic zone per m/s of pedestrian speed.
pub const ZONE_LENGTH_GAIN: f64 = 1.5;
/// Extra decay factor on the dynamic sector angle.
pub const ZONE_ANGLE_DECAY: f64 = 1.5;

/// Which safety-zone model shapes observations and penalties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ZoneModel {
    /// No zones: zone radius reads as 0 and nothing is flagged.
    #[default]
    None,
    Static,
    Dynamic,
}

impl std::str::FromStr for ZoneModel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(ZoneModel::None),
            "static" => Ok(ZoneModel::Static),
            "dynamic" => Ok(ZoneModel::Dynamic),
            other => Err(format!("unknown zone model `{other}` (none|static|dynamic)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticZone {
    pub radius: f64,
}

impl StaticZone {
    pub fn for_class(class: AgentClass) -> Self {
        Self {
            radius: class.static_zone_radius(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicZone {
    /// Zone length `k_v * v + r_static`, m.
    pub length: f64,
    /// Full opening angle of the sector, rad, in `(pi/6, 2*pi]`.
    pub angle: f64,
    /// Direction the sector opens toward, rad.
    pub orientation: f64,
    pub r_static: f64,
    pub k_v: f64,
    pub a_v: f64,
}

impl DynamicZone {
    pub fn new(r_static: f64, speed: f64, orientation: f64) -> Self {
        Self {
            length: zone_length(speed, r_static),
            angle: zone_angle(speed),
            orientation,
            r_static,
            k_v: ZONE_LENGTH_GAIN,
            a_v: ZONE_ANGLE_DECAY,
        }
    }

    pub fn is_full_disc(&self) -> bool {
        self.angle >= TAU - 1e-12
    }

    /// True when `bearing` (world-frame direction from the pedestrian) lies
    /// within half the opening angle of the orientation.
    pub fn covers_bearing(&self, bearing: f64) -> bool {
        self.is_full_disc() || wrap_angle(bearing - self.orientation).abs() <= 0.5 * self.angle
    }
}

pub fn zone_length(speed: f64, r_static: f64) -> f64 {
    ZONE_LENGTH_GAIN * speed + r_static
}

pub fn zone_angle(speed: f64) -> f64 {
    11.0 * PI / 6.0 * (-1.4 * ZONE_ANGLE_DECAY * speed).exp() + PI / 6.0
}

/// Dynamic zone of a pedestrian, opening along its velocity. A pedestrian
/// at rest gets a full disc oriented along its heading.
pub fn dynamic_zone_for(ped: &PedestrianState) -> DynamicZone {
    let speed = ped.speed();
    let orientation = if speed > 0.0 { ped.velocity.angle() } else { ped.heading };
    DynamicZone::new(ped.class.static_zone_radius(), speed, orientation)
}

/// Centre-to-centre test against the class static radius.
pub fn in_static_zone(robot: &RobotState, ped: &PedestrianState) -> bool {
    robot.position.distance(ped.position) < ped.class.static_zone_radius()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicZoneCheck {
    pub inside: bool,
    /// Surface clearance: centre distance minus both radii.
    pub clearance: f64,
    pub zone: DynamicZone,
}

pub fn in_dynamic_zone(robot: &RobotState, ped: &PedestrianState) -> DynamicZoneCheck {
    let zone = dynamic_zone_for(ped);
    let body = ped.radius();
    let offset = robot.position - ped.position;
    let clearance = offset.norm() - body - robot.radius;
    let inside = clearance < zone.length - body && zone.covers_bearing(offset.angle());
    DynamicZoneCheck {
        inside,
        clearance,
        zone,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec2;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn adult_moving(vx: f64) -> PedestrianState {
        let mut p = PedestrianState::new(0, AgentClass::Adult, Vec2::ZERO, vec![Vec2::new(10.0, 0.0)]);
        p.velocity = Vec2::new(vx, 0.0);
        p
    }

    fn robot_at(x: f64, y: f64) -> RobotState {
        RobotState::new(Vec2::new(x, y), 0.0, Vec2::new(20.0, 20.0))
    }

    #[test]
    fn adult_at_rest_is_full_disc() {
        let z = dynamic_zone_for(&adult_moving(0.0));
        assert_eq!(z.length, 1.0);
        assert_eq!(z.angle, TAU);
    }

    #[test]
    fn adult_walking_zone() {
        let z = dynamic_zone_for(&adult_moving(0.6));
        assert_relative_eq!(z.length, 1.9, epsilon = 1e-12);
        // 11*pi/6 * e^-1.26 + pi/6, evaluated by hand: 5.7596 * 0.28365 + 0.5236
        assert_relative_eq!(z.angle, 2.158, epsilon = 1e-3);
    }

    #[test]
    fn static_zone_predicate() {
        let adult = adult_moving(0.0);
        assert!(in_static_zone(&robot_at(0.9, 0.0), &adult));
        assert!(!in_static_zone(&robot_at(1.0, 0.0), &adult));
        let mut child = adult.clone();
        child.class = AgentClass::Child;
        assert!(!in_static_zone(&robot_at(1.4, 0.0), &child));
        assert!(in_static_zone(&robot_at(1.1, 0.0), &child));
    }

    #[test]
    fn dynamic_zone_full_disc_distance_only() {
        // d_c = 0.2 with R = 0.3, d_r = 0.3 => centre distance 0.8
        let c = in_dynamic_zone(&robot_at(0.0, 0.8), &adult_moving(0.0));
        assert_relative_eq!(c.clearance, 0.2, epsilon = 1e-12);
        assert!(c.inside);
    }

    #[test]
    fn dynamic_zone_excludes_robot_behind_fast_pedestrian() {
        let c = in_dynamic_zone(&robot_at(-0.7, 0.0), &adult_moving(0.6));
        assert!(c.clearance < c.zone.length - 0.3);
        assert!(!c.inside);
        let ahead = in_dynamic_zone(&robot_at(0.7, 0.0), &adult_moving(0.6));
        assert!(ahead.inside);
    }

    #[test]
    fn dynamic_zone_boundary_is_outside() {
        // clearance == length - R  <=>  centre distance == length + d_r
        let c = in_dynamic_zone(&robot_at(1.0 + 0.3 + 0.0, 0.0), &adult_moving(0.0));
        assert_relative_eq!(c.clearance, c.zone.length - 0.3, epsilon = 0.0);
        assert!(!c.inside);
    }

    proptest! {
        #[test]
        fn length_affine_and_angle_decreasing(v in 0.0f64..5.0, dv in 1e-6f64..1.0) {
            let r = 1.2;
            prop_assert!((zone_length(v, r) - r - 1.5 * v).abs() < 1e-12);
            prop_assert!(zone_length(v + dv, r) > zone_length(v, r));
            prop_assert!(zone_angle(v + dv) < zone_angle(v));
            prop_assert!(zone_angle(v) > PI / 6.0);
        }

        #[test]
        fn class_zones_nest(v in 0.0f64..1.0, x in -4.0f64..4.0, y in -4.0f64..4.0) {
            let mut peds: Vec<PedestrianState> = AgentClass::ALL
                .iter()
                .map(|c| {
                    let mut p = adult_moving(v);
                    p.class = *c;
                    p
                })
                .collect();
            peds.iter_mut().for_each(|p| p.heading = 0.0);
            let r = robot_at(x, y);
            let inside: Vec<bool> = peds.iter().map(|p| in_dynamic_zone(&r, p).inside).collect();
            // adult => child => elder
            prop_assert!(!inside[0] || inside[1]);
            prop_assert!(!inside[1] || inside[2]);
        }
    }
}
