//! Raman-crosstalk budget: two-photon Rabi frequencies from atomic
//! parameters, the intensities needed for the target gate couplings, and
//! the worst-case population transfer on the wrong ion.
//!
//! The two-photon coupling through both fine-structure levels is
//!
//! ```text
//! Omega_Yb = (I / 12)         (-k1/Delta1 + k2/Delta2)
//! Omega_Ba = (sqrt(2) I / 12) (-k1/Delta1 + k2/Delta2)
//! ```
//!
//! with k_i = gamma_i^2 / I_sat,i, and a far-detuned coupling transfers at
//! most Omega^2 / (Delta^2 + Omega^2) of the population in a single pulse.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::observable::Ion;

/// Which Raman laser: the 355 nm beams drive Yb on purpose, the 532 nm
/// beams drive Ba.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RamanLaser {
    L355,
    L532,
}

impl RamanLaser {
    /// The ion this laser is intended for.
    pub fn target_ion(self) -> Ion {
        match self {
            RamanLaser::L355 => Ion::Yb,
            RamanLaser::L532 => Ion::Ba,
        }
    }
}

/// One excited fine-structure level of one ion.
#[derive(Clone, Debug, Deserialize)]
pub struct IonLevel {
    pub ion: String,
    pub level: String,
    pub linewidth_mhz: f64,
    pub saturation_mw_per_cm2: f64,
    pub detuning_355_thz: f64,
    pub detuning_532_thz: f64,
    pub k_mhz2_cm2_per_mw: f64,
}

impl IonLevel {
    /// k = gamma^2 / I_sat, derived from first principles.
    pub fn k_derived(&self) -> f64 {
        self.linewidth_mhz * self.linewidth_mhz / self.saturation_mw_per_cm2
    }

    pub fn detuning_thz(&self, laser: RamanLaser) -> f64 {
        match laser {
            RamanLaser::L355 => self.detuning_355_thz,
            RamanLaser::L532 => self.detuning_532_thz,
        }
    }
}

/// The full parameter table plus the comb bookkeeping needed for the
/// wrong-ion detunings.
#[derive(Clone, Debug, Deserialize)]
pub struct IonOpticalParams {
    pub repetition_rate_mhz: f64,
    pub qubit_splitting_yb_mhz: f64,
    pub qubit_splitting_ba_mhz: f64,
    pub comb_shift_355_mhz: f64,
    pub comb_shift_532_mhz: f64,
    pub levels: Vec<IonLevel>,
}

impl IonOpticalParams {
    /// The table shipped with the crate.
    pub fn builtin() -> Self {
        toml::from_str(include_str!("../data/ion_levels.toml"))
            .expect("embedded ion level table parses")
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let table: Self = toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: 0,
            msg: e.to_string(),
        })?;
        table.check_consistency()?;
        Ok(table)
    }

    /// Every stored k must match gamma^2 / I_sat within 1%.
    pub fn check_consistency(&self) -> Result<()> {
        for level in &self.levels {
            let derived = level.k_derived();
            let rel = (derived - level.k_mhz2_cm2_per_mw).abs() / level.k_mhz2_cm2_per_mw;
            if rel > 0.01 {
                return Err(Error::InvalidConfig(format!(
                    "{} {}: stored k = {} but gamma^2/I_sat = {derived:.4}",
                    level.ion, level.level, level.k_mhz2_cm2_per_mw
                )));
            }
        }
        self.level(Ion::Yb, "P1/2")?;
        self.level(Ion::Yb, "P3/2")?;
        self.level(Ion::Ba, "P1/2")?;
        self.level(Ion::Ba, "P3/2")?;
        Ok(())
    }

    fn level(&self, ion: Ion, name: &str) -> Result<&IonLevel> {
        let tag = match ion {
            Ion::Yb => "Yb",
            Ion::Ba => "Ba",
        };
        self.levels
            .iter()
            .find(|l| l.ion == tag && l.level == name)
            .ok_or_else(|| Error::InvalidConfig(format!("missing level {tag} {name}")))
    }

    /// d(Omega)/d(I): the two-photon coupling per unit intensity, in
    /// MHz per (mW/cm^2), signed.
    fn rabi_slope(&self, ion: Ion, laser: RamanLaser) -> Result<f64> {
        let p12 = self.level(ion, "P1/2")?;
        let p32 = self.level(ion, "P3/2")?;
        let d1 = p12.detuning_thz(laser);
        let d2 = p32.detuning_thz(laser);
        if d1 == 0.0 || d2 == 0.0 {
            return Err(Error::ZeroDetuning(format!("{ion:?} at {laser:?}")));
        }
        // THz -> MHz for the denominators
        let bracket = -p12.k_derived() / (d1 * 1e6) + p32.k_derived() / (d2 * 1e6);
        let prefactor = match ion {
            Ion::Yb => 1.0 / 12.0,
            Ion::Ba => std::f64::consts::SQRT_2 / 12.0,
        };
        Ok(prefactor * bracket)
    }
}

/// |Omega|/2pi in MHz for the given ion, laser, and intensity (mW/cm^2).
pub fn raman_rabi(
    table: &IonOpticalParams,
    ion: Ion,
    laser: RamanLaser,
    intensity: f64,
) -> Result<f64> {
    if intensity < 0.0 {
        return Err(Error::OutOfRange(format!("intensity {intensity}")));
    }
    Ok((table.rabi_slope(ion, laser)? * intensity).abs())
}

/// Intensity (mW/cm^2) giving the target |Omega|/2pi (MHz); the coupling is
/// linear in intensity.
pub fn intensity_for_rabi(
    table: &IonOpticalParams,
    ion: Ion,
    laser: RamanLaser,
    omega_target_mhz: f64,
) -> Result<f64> {
    if omega_target_mhz <= 0.0 {
        return Err(Error::OutOfRange(format!("target Rabi {omega_target_mhz}")));
    }
    Ok(omega_target_mhz / table.rabi_slope(ion, laser)?.abs())
}

/// Maximum population transfer Omega^2 / (Delta^2 + Omega^2) of a detuned
/// Rabi oscillation (both in the same frequency units).
pub fn max_population_transfer(omega_mhz: f64, detuning_mhz: f64) -> Result<f64> {
    if omega_mhz == 0.0 && detuning_mhz == 0.0 {
        return Err(Error::OutOfRange(
            "Rabi frequency and detuning both zero".into(),
        ));
    }
    let o2 = omega_mhz * omega_mhz;
    Ok(o2 / (detuning_mhz * detuning_mhz + o2))
}

/// |splitting - shift|, the nearest-comb-line detuning at m = 0.
pub fn comb_detuning(qubit_splitting_mhz: f64, comb_shift_mhz: f64) -> f64 {
    (qubit_splitting_mhz - comb_shift_mhz).abs()
}

/// Minimum |splitting - shift - m * spacing| over comb lines m >= 0,
/// returning the detuning and the minimizing line.
pub fn comb_detuning_min(
    qubit_splitting_mhz: f64,
    comb_shift_mhz: f64,
    comb_spacing_mhz: f64,
) -> (f64, u64) {
    let target = qubit_splitting_mhz - comb_shift_mhz;
    let guess = (target / comb_spacing_mhz).round();
    let mut best = (f64::INFINITY, 0u64);
    for m in [guess - 1.0, guess, guess + 1.0] {
        let m = m.max(0.0);
        let d = (target - m * comb_spacing_mhz).abs();
        if d < best.0 {
            best = (d, m as u64);
        }
    }
    best
}

/// Full wrong-ion crosstalk budget derived from the parameter table and the
/// target couplings alone.
#[derive(Clone, Debug)]
pub struct CrosstalkBudget {
    /// Target coupling |Omega|/2pi (MHz) that sets the beam intensities.
    pub target_rabi_mhz: f64,
    /// Intensity of the 355 nm beams, from the Yb target coupling.
    pub intensity_355: f64,
    /// Intensity of the 532 nm beams, from the Ba target coupling.
    pub intensity_532: f64,
    /// Wrong-ion couplings at those intensities.
    pub rabi_yb_from_532: f64,
    pub rabi_ba_from_355: f64,
    /// Conservative comb detuning (MHz) applied to both species.
    pub detuning_mhz: f64,
    /// Yb's actual nearest-comb-line detuning (MHz, minimizing line m).
    pub yb_comb_detuning_mhz: f64,
    pub yb_comb_line: u64,
    pub p_max_yb_from_532: f64,
    pub p_max_ba_from_355: f64,
}

impl CrosstalkBudget {
    pub fn worst_transfer(&self) -> f64 {
        self.p_max_yb_from_532.max(self.p_max_ba_from_355)
    }

    /// A single-pulse transfer below this leaves the C statistic unchanged
    /// at the 1e-5 level.
    pub fn negligible(&self) -> bool {
        self.worst_transfer() < 1e-5
    }
}

/// Evaluate the budget at the target coupling of 0.18 MHz on both ions.
pub fn crosstalk_budget(table: &IonOpticalParams) -> Result<CrosstalkBudget> {
    crosstalk_budget_at(table, 0.18)
}

pub fn crosstalk_budget_at(
    table: &IonOpticalParams,
    target_rabi_mhz: f64,
) -> Result<CrosstalkBudget> {
    table.check_consistency()?;
    let intensity_355 = intensity_for_rabi(table, Ion::Yb, RamanLaser::L355, target_rabi_mhz)?;
    let intensity_532 = intensity_for_rabi(table, Ion::Ba, RamanLaser::L532, target_rabi_mhz)?;
    let rabi_yb_from_532 = raman_rabi(table, Ion::Yb, RamanLaser::L532, intensity_532)?;
    let rabi_ba_from_355 = raman_rabi(table, Ion::Ba, RamanLaser::L355, intensity_355)?;
    let detuning_mhz = comb_detuning(table.qubit_splitting_ba_mhz, table.comb_shift_355_mhz);
    let (yb_comb_detuning_mhz, yb_comb_line) = comb_detuning_min(
        table.qubit_splitting_yb_mhz,
        table.comb_shift_355_mhz,
        table.repetition_rate_mhz,
    );
    Ok(CrosstalkBudget {
        target_rabi_mhz,
        intensity_355,
        intensity_532,
        rabi_yb_from_532,
        rabi_ba_from_355,
        detuning_mhz,
        yb_comb_detuning_mhz,
        yb_comb_line,
        p_max_yb_from_532: max_population_transfer(rabi_yb_from_532, detuning_mhz)?,
        p_max_ba_from_355: max_population_transfer(rabi_ba_from_355, detuning_mhz)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stored_k_row_matches_derived_within_one_percent() {
        let table = IonOpticalParams::builtin();
        table.check_consistency().unwrap();
        let expected = [7.61, 7.00, 13.90, 8.78];
        for (level, k) in table.levels.iter().zip(expected) {
            assert!(
                (level.k_derived() - k).abs() / k < 0.01,
                "{} {}: derived {} vs stored {k}",
                level.ion,
                level.level,
                level.k_derived()
            );
        }
    }

    #[test]
    fn wrong_ion_couplings_at_reported_intensities() {
        let table = IonOpticalParams::builtin();
        // hand-evaluated from the table: (7.60961/248 - 6.99937/347)/12
        // per unit intensity, times 6.86e6
        let yb = raman_rabi(&table, Ion::Yb, RamanLaser::L532, 6.86e6).unwrap();
        assert!((yb - 0.0060098).abs() < 2e-6, "Omega_Yb,532 = {yb}");
        assert!((yb / 0.006 - 1.0).abs() < 0.05);
        let ba = raman_rabi(&table, Ion::Ba, RamanLaser::L355, 6.37e6).unwrap();
        assert!((ba - 0.0086239).abs() < 2e-6, "Omega_Ba,355 = {ba}");
        assert!((ba / 0.009 - 1.0).abs() < 0.05);
    }

    #[test]
    fn zero_intensity_gives_zero_coupling() {
        let table = IonOpticalParams::builtin();
        assert_eq!(
            raman_rabi(&table, Ion::Yb, RamanLaser::L355, 0.0).unwrap(),
            0.0
        );
    }

    #[test]
    fn intensities_for_target_coupling() {
        let table = IonOpticalParams::builtin();
        let i532 = intensity_for_rabi(&table, Ion::Ba, RamanLaser::L532, 0.18).unwrap();
        assert!((i532 - 6.8608e6).abs() < 2e3, "I_532 = {i532:.4e}");
        assert!((i532 / 6.86e6 - 1.0).abs() < 0.01);
        // From the table's own numbers the Yb coupling of 0.18 MHz needs
        // 6.548e6 mW/cm^2 (an intensity of 6.37e6 corresponds to 0.175 MHz).
        let i355 = intensity_for_rabi(&table, Ion::Yb, RamanLaser::L355, 0.18).unwrap();
        assert!((i355 - 6.5482e6).abs() < 2e3, "I_355 = {i355:.4e}");
    }

    #[test]
    fn intensity_is_linear_in_target() {
        let table = IonOpticalParams::builtin();
        let single = intensity_for_rabi(&table, Ion::Ba, RamanLaser::L532, 0.18).unwrap();
        let double = intensity_for_rabi(&table, Ion::Ba, RamanLaser::L532, 0.36).unwrap();
        assert!((double / single - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rabi_intensity_round_trip() {
        let table = IonOpticalParams::builtin();
        for (ion, laser) in [
            (Ion::Yb, RamanLaser::L355),
            (Ion::Yb, RamanLaser::L532),
            (Ion::Ba, RamanLaser::L355),
            (Ion::Ba, RamanLaser::L532),
        ] {
            let omega = 0.18;
            let i = intensity_for_rabi(&table, ion, laser, omega).unwrap();
            let back = raman_rabi(&table, ion, laser, i).unwrap();
            assert!(
                ((back - omega) / omega).abs() < 1e-9,
                "{ion:?} {laser:?}: {back} vs {omega}"
            );
        }
    }

    #[test]
    fn population_transfer_values() {
        let p1 = max_population_transfer(0.006, 4.3).unwrap();
        assert!((p1 - 1.947e-6).abs() < 1e-9, "P_max(0.006) = {p1:.4e}");
        assert!((p1 / 1.9e-6 - 1.0).abs() < 0.05);
        let p2 = max_population_transfer(0.009, 4.3).unwrap();
        assert!((p2 - 4.3807e-6).abs() < 1e-9, "P_max(0.009) = {p2:.4e}");
        assert!((p2 / 4.3e-6 - 1.0).abs() < 0.05);
        assert_eq!(max_population_transfer(0.5, 0.0).unwrap(), 1.0);
        assert!(max_population_transfer(0.0, 0.0).is_err());
    }

    #[test]
    fn population_transfer_monotonicity() {
        let mut prev = 0.0;
        for i in 1..50 {
            let p = max_population_transfer(0.001 * i as f64, 4.3).unwrap();
            assert!(p > prev, "increasing in Omega");
            prev = p;
        }
        let mut prev = 1.0;
        for i in 1..50 {
            let p = max_population_transfer(0.01, 0.5 * i as f64).unwrap();
            assert!(p < prev, "decreasing in |Delta|");
            prev = p;
        }
    }

    #[test]
    fn comb_detuning_basics() {
        assert!((comb_detuning(16.8, 12.5) - 4.3).abs() < 1e-12);
        assert_eq!(comb_detuning(12.5, 12.5), 0.0);
    }

    #[test]
    fn comb_minimization_matches_brute_force() {
        let (d, m) = comb_detuning_min(12642.8, 12.5, 80.097);
        // independent exhaustive scan
        let mut best = (f64::INFINITY, 0u64);
        for mm in 0..400u64 {
            let dd = (12642.8 - 12.5 - mm as f64 * 80.097).abs();
            if dd < best.0 {
                best = (dd, mm);
            }
        }
        assert_eq!(m, best.1);
        assert!((d - best.0).abs() < 1e-12);
        assert_eq!(m, 158);
        assert!((d - 25.026).abs() < 1e-9, "min comb detuning {d}");
    }

    #[test]
    fn budget_is_negligible() {
        let table = IonOpticalParams::builtin();
        let budget = crosstalk_budget(&table).unwrap();
        assert!(
            budget.negligible(),
            "worst transfer {:.3e}",
            budget.worst_transfer()
        );
        assert!((budget.detuning_mhz - 4.3).abs() < 1e-12);
        assert!(budget.p_max_yb_from_532 < 3e-6);
        assert!(budget.p_max_ba_from_355 < 6e-6);
    }
}
