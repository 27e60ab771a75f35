/*
Copyright 2026 The Inchworm Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

//! Docking interfaces and the per-end interface control unit (ICU).
//!
//! Each robot end carries one ICU. A close request is only accepted when the
//! end sits within the capture tolerance of an unoccupied interface; the
//! clutch then closes over `close_duration` and the coupling is verified
//! through the hall sensor. Opening is refused when it would leave the robot
//! without any docked end.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{DockingMode, End};
use crate::pose::Pose;

pub const NOMINAL_SUPPLY_VOLTAGE: f64 = 24.0;
pub const NOMINAL_TEMPERATURE: f64 = 35.0;
pub const MIN_SUPPLY_VOLTAGE: f64 = 18.0;
pub const MAX_TEMPERATURE: f64 = 70.0;
pub const DEFAULT_CLOSE_DURATION: f64 = 2.0;
pub const DEFAULT_OPEN_DURATION: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterfaceKind {
    Active,
    Passive,
}

/// A docking interface on the structure. `pose` is the mating frame with
/// `+z` pointing away from the surface; a docked end frame coincides with it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interface {
    pub id: String,
    pub pose: Pose,
    pub kind: InterfaceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub occupied_by: Option<End>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlignmentTolerance {
    pub translation: f64,
    pub rotation: f64,
}

impl Default for AlignmentTolerance {
    fn default() -> Self {
        AlignmentTolerance {
            translation: 0.005,
            rotation: 0.035,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub aligned: bool,
    pub translation_offset: f64,
    pub rotation_offset: f64,
}

pub fn alignment_check(end_pose: &Pose, iface: &Interface, tol: &AlignmentTolerance) -> Alignment {
    let translation_offset = end_pose.translation_distance(&iface.pose);
    let rotation_offset = end_pose.rotation_distance(&iface.pose);
    Alignment {
        aligned: translation_offset <= tol.translation && rotation_offset <= tol.rotation,
        translation_offset,
        rotation_offset,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultReason {
    Undervoltage,
    Overtemperature,
    CouplingVerificationFailed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum IcuPhase {
    Undocked,
    Aligned,
    Closing { progress: f64 },
    Docked,
    Opening { progress: f64 },
    Fault { reason: FaultReason },
}

impl IcuPhase {
    pub fn name(&self) -> &'static str {
        match self {
            IcuPhase::Undocked => "undocked",
            IcuPhase::Aligned => "aligned",
            IcuPhase::Closing { .. } => "closing",
            IcuPhase::Docked => "docked",
            IcuPhase::Opening { .. } => "opening",
            IcuPhase::Fault { .. } => "fault",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Telemetry {
    /// V
    pub supply_voltage: f64,
    /// °C
    pub temperature: f64,
}

impl Default for Telemetry {
    fn default() -> Self {
        Telemetry {
            supply_voltage: NOMINAL_SUPPLY_VOLTAGE,
            temperature: NOMINAL_TEMPERATURE,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Sensors {
    pub hall_coupled: bool,
    pub end_stop: bool,
}

/// State of one interface control unit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IcuState {
    pub end: End,
    pub phase: IcuPhase,
    pub telemetry: Telemetry,
    pub sensors: Sensors,
    /// Interface being closed on, held, or released.
    pub interface: Option<String>,
    /// Whether the hall sensor will fail to confirm the next coupling.
    #[serde(default)]
    pub hall_failure: bool,
}

impl IcuState {
    pub fn new(end: End) -> Self {
        IcuState {
            end,
            phase: IcuPhase::Undocked,
            telemetry: Telemetry::default(),
            sensors: Sensors::default(),
            interface: None,
            hall_failure: false,
        }
    }

    /// The clutch is mechanically engaged with an interface.
    pub fn is_coupled(&self) -> bool {
        self.sensors.end_stop && self.sensors.hall_coupled
    }

    pub fn is_docked(&self) -> bool {
        matches!(self.phase, IcuPhase::Docked)
    }

    fn fault_from_telemetry(&self) -> Option<FaultReason> {
        if self.telemetry.supply_voltage < MIN_SUPPLY_VOLTAGE {
            Some(FaultReason::Undervoltage)
        } else if self.telemetry.temperature > MAX_TEMPERATURE {
            Some(FaultReason::Overtemperature)
        } else {
            None
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DockingError {
    #[error("end {end} is not aligned (offset {translation:.4} m, {rotation:.4} rad)")]
    AlignmentError {
        end: End,
        translation: f64,
        rotation: f64,
    },
    #[error("end {end} cannot do that while {state}")]
    StateError { end: End, state: &'static str },
    #[error("interface {0} is occupied")]
    OccupiedError(String),
    #[error("opening end {0} would leave the robot without a docked end")]
    LastConnectionError(End),
    #[error("unknown interface {0}")]
    UnknownInterface(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum DockingEvent {
    CloseStarted { end: End, interface: String },
    Docked { end: End, interface: String },
    OpenStarted { end: End, interface: String },
    Undocked { end: End, interface: String },
    Fault { end: End, reason: FaultReason },
    Reset { end: End, phase: String },
}

/// Fault injection hooks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Injection {
    SupplyVoltage { volts: f64 },
    Temperature { celsius: f64 },
    HallFailure { failing: bool },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DockingParams {
    pub tolerance: AlignmentTolerance,
    /// s
    pub close_duration: f64,
    /// s
    pub open_duration: f64,
}

impl Default for DockingParams {
    fn default() -> Self {
        DockingParams {
            tolerance: AlignmentTolerance::default(),
            close_duration: DEFAULT_CLOSE_DURATION,
            open_duration: DEFAULT_OPEN_DURATION,
        }
    }
}

/// Both ICUs of the robot together with the interface table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DockingSystem {
    icus: [IcuState; 2],
    interfaces: Vec<Interface>,
    params: DockingParams,
}

impl DockingSystem {
    pub fn new(interfaces: Vec<Interface>, params: DockingParams) -> Self {
        DockingSystem {
            icus: [IcuState::new(End::B), IcuState::new(End::E)],
            interfaces,
            params,
        }
    }

    pub fn params(&self) -> &DockingParams {
        &self.params
    }

    pub fn icu(&self, end: End) -> &IcuState {
        &self.icus[end.index()]
    }

    pub fn interfaces(&self) -> &[Interface] {
        &self.interfaces
    }

    pub fn interface(&self, id: &str) -> Option<&Interface> {
        self.interfaces.iter().find(|i| i.id == id)
    }

    fn interface_mut(&mut self, id: &str) -> Option<&mut Interface> {
        self.interfaces.iter_mut().find(|i| i.id == id)
    }

    /// Puts `end` into the docked state on `iface` without running the
    /// clutch, e.g. for the initial stance of a scenario.
    pub fn set_docked(&mut self, end: End, iface: &str) -> Result<(), DockingError> {
        let occupant = self
            .interface(iface)
            .ok_or_else(|| DockingError::UnknownInterface(iface.to_string()))?
            .occupied_by;
        if occupant.is_some_and(|o| o != end) {
            return Err(DockingError::OccupiedError(iface.to_string()));
        }
        if let Some(old) = self.icus[end.index()].interface.clone() {
            if let Some(i) = self.interface_mut(&old) {
                i.occupied_by = None;
            }
        }
        self.interface_mut(iface)
            .expect("checked above")
            .occupied_by = Some(end);
        let icu = &mut self.icus[end.index()];
        icu.phase = IcuPhase::Docked;
        icu.sensors = Sensors {
            hall_coupled: true,
            end_stop: true,
        };
        icu.interface = Some(iface.to_string());
        Ok(())
    }

    /// Interface `end` is coupled to.
    pub fn docked_interface(&self, end: End) -> Option<&str> {
        let icu = self.icu(end);
        if icu.is_coupled() {
            icu.interface.as_deref()
        } else {
            None
        }
    }

    pub fn coupled_ends(&self) -> usize {
        self.icus.iter().filter(|i| i.is_coupled()).count()
    }

    /// Docking mode implied by which ends are coupled.
    pub fn mode(&self) -> Option<DockingMode> {
        DockingMode::from_docked(self.icu(End::B).is_coupled(), self.icu(End::E).is_coupled())
    }

    /// Updates the `Undocked`/`Aligned` distinction from the current end pose.
    pub fn observe_alignment(&mut self, end: End, end_pose: &Pose) {
        let tol = self.params.tolerance;
        let aligned = self
            .interfaces
            .iter()
            .filter(|i| i.occupied_by.is_none())
            .any(|i| alignment_check(end_pose, i, &tol).aligned);
        let icu = &mut self.icus[end.index()];
        match (icu.phase, aligned) {
            (IcuPhase::Undocked, true) => icu.phase = IcuPhase::Aligned,
            (IcuPhase::Aligned, false) => icu.phase = IcuPhase::Undocked,
            _ => {}
        }
    }

    pub fn request_close(
        &mut self,
        end: End,
        end_pose: &Pose,
        iface: &str,
    ) -> Result<DockingEvent, DockingError> {
        let phase = self.icu(end).phase;
        if !matches!(phase, IcuPhase::Undocked | IcuPhase::Aligned) {
            return Err(DockingError::StateError {
                end,
                state: phase.name(),
            });
        }
        let target = self
            .interface(iface)
            .ok_or_else(|| DockingError::UnknownInterface(iface.to_string()))?;
        let other = self.icu(end.other());
        if target.occupied_by.is_some() || other.interface.as_deref() == Some(iface) {
            return Err(DockingError::OccupiedError(iface.to_string()));
        }
        let check = alignment_check(end_pose, target, &self.params.tolerance);
        if !check.aligned {
            return Err(DockingError::AlignmentError {
                end,
                translation: check.translation_offset,
                rotation: check.rotation_offset,
            });
        }
        let icu = &mut self.icus[end.index()];
        icu.phase = IcuPhase::Closing { progress: 0.0 };
        icu.interface = Some(iface.to_string());
        Ok(DockingEvent::CloseStarted {
            end,
            interface: iface.to_string(),
        })
    }

    pub fn request_open(&mut self, end: End) -> Result<DockingEvent, DockingError> {
        let phase = self.icu(end).phase;
        if !matches!(phase, IcuPhase::Docked) {
            return Err(DockingError::StateError {
                end,
                state: phase.name(),
            });
        }
        if !self.icu(end.other()).is_docked() {
            return Err(DockingError::LastConnectionError(end));
        }
        let icu = &mut self.icus[end.index()];
        icu.phase = IcuPhase::Opening { progress: 0.0 };
        Ok(DockingEvent::OpenStarted {
            end,
            interface: icu.interface.clone().unwrap_or_default(),
        })
    }

    pub fn inject(&mut self, end: End, injection: Injection) {
        let icu = &mut self.icus[end.index()];
        match injection {
            Injection::SupplyVoltage { volts } => icu.telemetry.supply_voltage = volts,
            Injection::Temperature { celsius } => icu.telemetry.temperature = celsius,
            Injection::HallFailure { failing } => icu.hall_failure = failing,
        }
    }

    /// Leaves the fault state. The clutch state is kept: an end that is
    /// still coupled returns to `Docked`, otherwise to `Undocked`.
    pub fn reset(&mut self, end: End) -> Result<DockingEvent, DockingError> {
        let icu = &mut self.icus[end.index()];
        if !matches!(icu.phase, IcuPhase::Fault { .. }) {
            return Err(DockingError::StateError {
                end,
                state: icu.phase.name(),
            });
        }
        if icu.is_coupled() {
            icu.phase = IcuPhase::Docked;
        } else {
            icu.phase = IcuPhase::Undocked;
            icu.sensors = Sensors::default();
            icu.interface = None;
        }
        Ok(DockingEvent::Reset {
            end,
            phase: icu.phase.name().to_string(),
        })
    }

    /// Advances clutch motion and telemetry monitoring by `dt` seconds.
    pub fn tick(&mut self, dt: f64) -> Vec<DockingEvent> {
        let mut events = Vec::new();
        for end in [End::B, End::E] {
            self.tick_end(end, dt, &mut events);
        }
        events
    }

    fn tick_end(&mut self, end: End, dt: f64, events: &mut Vec<DockingEvent>) {
        let params = self.params;
        let icu = &mut self.icus[end.index()];
        if matches!(icu.phase, IcuPhase::Fault { .. }) {
            return;
        }
        if let Some(reason) = icu.fault_from_telemetry() {
            // A clutch that was mid-close is not trusted to hold.
            if matches!(icu.phase, IcuPhase::Closing { .. }) {
                icu.sensors = Sensors::default();
            }
            icu.phase = IcuPhase::Fault { reason };
            events.push(DockingEvent::Fault { end, reason });
            return;
        }
        match icu.phase {
            IcuPhase::Closing { progress } => {
                let progress = advance(progress, dt, params.close_duration);
                if progress < 1.0 {
                    icu.phase = IcuPhase::Closing { progress };
                    icu.sensors.end_stop = false;
                    return;
                }
                let iface = icu.interface.clone().unwrap_or_default();
                if icu.hall_failure {
                    icu.sensors = Sensors {
                        hall_coupled: false,
                        end_stop: true,
                    };
                    icu.phase = IcuPhase::Fault {
                        reason: FaultReason::CouplingVerificationFailed,
                    };
                    events.push(DockingEvent::Fault {
                        end,
                        reason: FaultReason::CouplingVerificationFailed,
                    });
                    return;
                }
                icu.sensors = Sensors {
                    hall_coupled: true,
                    end_stop: true,
                };
                icu.phase = IcuPhase::Docked;
                if let Some(i) = self.interface_mut(&iface) {
                    i.occupied_by = Some(end);
                }
                events.push(DockingEvent::Docked {
                    end,
                    interface: iface,
                });
            }
            IcuPhase::Opening { progress } => {
                let progress = advance(progress, dt, params.open_duration);
                if progress < 1.0 {
                    icu.phase = IcuPhase::Opening { progress };
                    return;
                }
                let iface = icu.interface.take().unwrap_or_default();
                icu.sensors = Sensors::default();
                icu.phase = IcuPhase::Undocked;
                if let Some(i) = self.interface_mut(&iface) {
                    i.occupied_by = None;
                }
                events.push(DockingEvent::Undocked {
                    end,
                    interface: iface,
                });
            }
            IcuPhase::Undocked | IcuPhase::Aligned | IcuPhase::Docked | IcuPhase::Fault { .. } => {}
        }
    }

    /// Checks the structural invariants; returns a description of the first
    /// violation.
    pub fn check_invariants(&self) -> Result<(), String> {
        for icu in &self.icus {
            if icu.is_docked() && !icu.is_coupled() {
                return Err(format!("{} docked without coupled sensors", icu.end));
            }
            if icu.is_coupled() {
                let Some(id) = icu.interface.as_deref() else {
                    return Err(format!("{} coupled without an interface", icu.end));
                };
                match self.interface(id) {
                    Some(i) if i.occupied_by == Some(icu.end) => {}
                    _ => return Err(format!("{} coupled to {id} but not its occupant", icu.end)),
                }
            }
        }
        for iface in &self.interfaces {
            if let Some(end) = iface.occupied_by {
                let icu = self.icu(end);
                if !icu.is_coupled() || icu.interface.as_deref() != Some(iface.id.as_str()) {
                    return Err(format!("{} claims occupant {end}", iface.id));
                }
            }
        }
        if self.coupled_ends() == 0 {
            return Err("no docked end".into());
        }
        Ok(())
    }
}

fn advance(progress: f64, dt: f64, duration: f64) -> f64 {
    if duration <= 0.0 {
        1.0
    } else {
        (progress + dt / duration).min(1.0)
    }
}
