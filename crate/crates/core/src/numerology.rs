//! Numerology parameters, the ten-entry waveform class table and neighbor-class grouping.

use std::fmt;

use crate::error::{Error, Result};

/// Base subcarrier spacing of numerology 0.
pub const BASE_SCS_HZ: f64 = 15_000.0;

/// Normal cyclic prefix length relative to the useful symbol (144 of 2048 samples).
pub const CP_RATIO: f64 = 144.0 / 2048.0;

pub const NUM_NUMEROLOGIES: usize = 4;

pub const NUM_CLASSES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumerologyParams {
    pub mu: u8,
    pub scs_hz: f64,
    pub t_sym_s: f64,
    pub t_cp_s: f64,
}

impl NumerologyParams {
    /// Fraction of airtime carrying the useful symbol, `t_sym / (t_sym + t_cp)`.
    pub fn cp_efficiency(&self) -> f64 {
        self.t_sym_s / (self.t_sym_s + self.t_cp_s)
    }
}

pub fn numerology_params(mu: u8) -> Result<NumerologyParams> {
    if mu as usize >= NUM_NUMEROLOGIES {
        return Err(Error::Domain(format!(
            "numerology index {mu} outside 0..={}",
            NUM_NUMEROLOGIES - 1
        )));
    }
    let scs_hz = BASE_SCS_HZ * f64::from(1u32 << mu);
    let t_sym_s = 1.0 / scs_hz;
    Ok(NumerologyParams {
        mu,
        scs_hz,
        t_sym_s,
        t_cp_s: CP_RATIO * t_sym_s,
    })
}

/// Infallible lookup for indices already known to be valid.
pub(crate) fn params(mu: u8) -> NumerologyParams {
    numerology_params(mu).expect("numerology index validated by caller")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GuardOption {
    G1,
    G2,
    G3,
    None,
}

impl GuardOption {
    pub const fn name(self) -> &'static str {
        match self {
            GuardOption::G1 => "G1",
            GuardOption::G2 => "G2",
            GuardOption::G3 => "G3",
            GuardOption::None => "NONE",
        }
    }
}

impl fmt::Display for GuardOption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Guard widths in 15 kHz subcarrier units for the three guard options.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GuardWidths {
    pub g1: u32,
    pub g2: u32,
    pub g3: u32,
}

impl Default for GuardWidths {
    fn default() -> Self {
        Self { g1: 0, g2: 4, g3: 6 }
    }
}

impl GuardWidths {
    pub fn sc15(&self, guard: GuardOption) -> u32 {
        match guard {
            GuardOption::G1 => self.g1,
            GuardOption::G2 => self.g2,
            GuardOption::G3 => self.g3,
            GuardOption::None => 0,
        }
    }

    pub fn hz(&self, guard: GuardOption) -> f64 {
        f64::from(self.sc15(guard)) * BASE_SCS_HZ
    }

    pub fn validate(&self) -> Result<()> {
        if self.g1 <= self.g2 && self.g2 <= self.g3 {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "guard widths must be non-decreasing, got G1={} G2={} G3={}",
                self.g1, self.g2, self.g3
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WaveformClass {
    pub label: u8,
    pub num_count: u8,
    pub guard: GuardOption,
}

impl WaveformClass {
    pub fn flexibility(&self) -> f64 {
        f64::from(self.num_count) / NUM_NUMEROLOGIES as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassTable {
    entries: Vec<WaveformClass>,
}

impl ClassTable {
    pub fn entries(&self) -> &[WaveformClass] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, label: u8) -> Result<&WaveformClass> {
        self.entries
            .iter()
            .find(|c| c.label == label)
            .ok_or_else(|| Error::Domain(format!("unknown class label {label}")))
    }

    pub fn iter(&self) -> impl Iterator<Item = &WaveformClass> {
        self.entries.iter()
    }
}

/// The ten classes: counts 4, 3, 2 with guards G1..G3 in ascending width, then a
/// single numerology without guard.
pub fn class_table() -> ClassTable {
    let mut entries = Vec::with_capacity(NUM_CLASSES);
    let mut label = 1u8;
    for num_count in [4u8, 3, 2] {
        for guard in [GuardOption::G1, GuardOption::G2, GuardOption::G3] {
            entries.push(WaveformClass {
                label,
                num_count,
                guard,
            });
            label += 1;
        }
    }
    entries.push(WaveformClass {
        label,
        num_count: 1,
        guard: GuardOption::None,
    });
    ClassTable { entries }
}

/// Maps each class label 1..=10 to a group id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassGrouping {
    map: [u8; NUM_CLASSES],
}

impl Default for ClassGrouping {
    /// Groups by numerology count: {1,2,3}, {4,5,6}, {7,8,9}, {10}.
    fn default() -> Self {
        Self {
            map: [1, 1, 1, 2, 2, 2, 3, 3, 3, 4],
        }
    }
}

impl ClassGrouping {
    pub fn new(map: [u8; NUM_CLASSES]) -> Self {
        Self { map }
    }

    pub fn as_array(&self) -> &[u8; NUM_CLASSES] {
        &self.map
    }
}

pub fn group_of(label: u8, grouping: &ClassGrouping) -> Result<u8> {
    if !(1..=NUM_CLASSES as u8).contains(&label) {
        return Err(Error::Domain(format!("unknown class label {label}")));
    }
    Ok(grouping.map[usize::from(label - 1)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numerology_zero_and_three() {
        let p0 = numerology_params(0).unwrap();
        assert_eq!(p0.scs_hz, 15_000.0);
        assert!((p0.t_sym_s - 66.666_666_666e-6).abs() < 1e-15);
        assert!((p0.t_cp_s - 4.6875e-6).abs() < 1e-18);

        let p3 = numerology_params(3).unwrap();
        assert_eq!(p3.scs_hz, 120_000.0);
        assert!((p3.t_sym_s - 8.333_333_333e-6).abs() < 1e-15);
        assert!((p3.t_cp_s - 0.585_937_5e-6).abs() < 1e-18);
    }

    #[test]
    fn numerology_four_rejected() {
        assert!(matches!(numerology_params(4), Err(Error::Domain(_))));
    }

    #[test]
    fn scs_doubles_and_cp_overhead_constant() {
        let base = numerology_params(0).unwrap();
        let overhead = |p: &NumerologyParams| p.t_cp_s / (p.t_sym_s + p.t_cp_s);
        for mu in 0..3 {
            let a = numerology_params(mu).unwrap();
            let b = numerology_params(mu + 1).unwrap();
            assert_eq!(b.scs_hz, 2.0 * a.scs_hz);
            assert!((overhead(&b) - overhead(&base)).abs() < 1e-12);
        }
    }

    #[test]
    fn class_table_layout() {
        let t = class_table();
        assert_eq!(t.len(), 10);
        assert_eq!(
            t.entries()[0],
            WaveformClass {
                label: 1,
                num_count: 4,
                guard: GuardOption::G1
            }
        );
        assert_eq!(
            t.entries()[9],
            WaveformClass {
                label: 10,
                num_count: 1,
                guard: GuardOption::None
            }
        );
        for (i, c) in t.iter().enumerate() {
            assert_eq!(usize::from(c.label), i + 1);
        }
        for count in [2u8, 3, 4] {
            assert_eq!(t.iter().filter(|c| c.num_count == count).count(), 3);
        }
        assert_eq!(t.iter().filter(|c| c.num_count == 1).count(), 1);
        assert!(t
            .iter()
            .all(|c| (c.guard == GuardOption::None) == (c.num_count == 1)));
    }

    #[test]
    fn default_grouping() {
        let g = ClassGrouping::default();
        assert_eq!(group_of(2, &g).unwrap(), 1);
        assert_eq!(group_of(10, &g).unwrap(), 4);
        assert_eq!(group_of(7, &g).unwrap(), 3);
        assert!(group_of(0, &g).is_err());
        assert!(group_of(11, &g).is_err());
        let mut seen: Vec<u8> = (1..=10).map(|l| group_of(l, &g).unwrap()).collect();
        seen.dedup();
        assert_eq!(seen, vec![1, 2, 3, 4]);
    }

    #[test]
    fn guard_widths_default() {
        let w = GuardWidths::default();
        assert_eq!(w.sc15(GuardOption::G3), 6);
        assert_eq!(w.hz(GuardOption::G2), 60_000.0);
        assert_eq!(w.sc15(GuardOption::None), 0);
    }
}
