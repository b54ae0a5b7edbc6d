//! Named experiment settings for `gen` and `study`.

use clap::ValueEnum;
use rfcgen::bench::study::Family;
use rfcgen::composition::DeceptiveParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// First-order n = 10, r = 20, skewed variance shares.
    Fig4,
    /// Interaction ensembles on n = 5, r = 5.
    Fig5,
    /// First-order n = 5 at increasing resolution.
    Fig6,
    /// One full-order field at r = 10.
    Fig7,
    /// Deceptive 2-d composition.
    Fig8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyKind {
    FirstOrder,
    Interaction,
    FullOrder,
    Deceptive,
}

/// Free parameters a preset or family may take from flags.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub n: Option<usize>,
    pub r: Option<u32>,
    pub k: Option<f64>,
    pub q: Option<usize>,
    pub d: Option<usize>,
}

impl Preset {
    /// Family of a single instance.
    pub fn family(self, o: &Overrides) -> Family {
        match self {
            Preset::Fig4 => Family::FirstOrder {
                n: o.n.unwrap_or(10),
                r: o.r.unwrap_or(20),
                k: o.k.unwrap_or(0.0),
            },
            Preset::Fig5 => Family::Interaction {
                n: o.n.unwrap_or(5),
                r: o.r.unwrap_or(5),
                max_order: o.q.unwrap_or(5),
            },
            Preset::Fig6 => Family::FirstOrder {
                n: o.n.unwrap_or(5),
                r: o.r.unwrap_or(5),
                k: 0.0,
            },
            Preset::Fig7 => Family::FullOrder {
                d: o.d.unwrap_or(2),
                r: o.r.unwrap_or(10),
            },
            Preset::Fig8 => Family::Deceptive(DeceptiveParams {
                n: o.n.unwrap_or(2),
                ..DeceptiveParams::default()
            }),
        }
    }

    /// Swept values of the study.
    pub fn sweep(self) -> Vec<f64> {
        match self {
            Preset::Fig4 => vec![0.0, 1.0, 2.0, 5.0, 10.0],
            Preset::Fig5 => vec![1.0, 2.0, 3.0, 4.0, 5.0],
            Preset::Fig6 => vec![5.0, 10.0, 20.0, 40.0],
            Preset::Fig7 => vec![1.0, 2.0, 3.0, 4.0, 5.0],
            Preset::Fig8 => vec![],
        }
    }

    pub fn default_seeds(self) -> u64 {
        match self {
            Preset::Fig8 => 50,
            _ => 20,
        }
    }

    pub fn default_budget(self) -> u64 {
        match self {
            Preset::Fig8 => 20_000,
            _ => 200_000,
        }
    }
}

/// A family given only by flags, with the same defaults as the presets.
pub fn family_from_flags(kind: FamilyKind, o: &Overrides) -> Family {
    match kind {
        FamilyKind::FirstOrder => Preset::Fig4.family(o),
        FamilyKind::Interaction => Preset::Fig5.family(o),
        FamilyKind::FullOrder => Preset::Fig7.family(o),
        FamilyKind::Deceptive => Preset::Fig8.family(o),
    }
}
