// SPDX-License-Identifier: Apache-2.0

//! Charge-domain simulation of the capacitor-array cores.

pub mod adc;
pub mod bank;
pub mod core;
pub mod network;
pub mod params;

pub use self::core::{
    comparator_output, core_step, precharge_and_share, swap_and_share, Column, CoreState, EventLog,
    Mismatch, Role, StepResult,
};
pub use adc::{adc_gain, full_scale, sar_convert, sar_ideal_code};
pub use bank::{neumaier_sum, share, Capacitor, ChargeMonitor, Share};
pub use network::{simulate, CircuitForward, CircuitNetwork};
pub use params::{AdcConfig, CircuitParams, VoltageParams};
