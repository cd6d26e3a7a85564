//! Sensing-occasion schedules and their placement on the slow-time grid.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::WaveformConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// A chirp in every slot.
    SensingOnly,
    /// A chirp in the first slot of every group of `M`.
    PeriodicTd,
    /// `K` chirp slots drawn at random from `MK`.
    Rtd,
    /// FSI-OFDM with a random sensing code per symbol.
    FsiRandom,
    /// FSI-OFDM with the tail code in every symbol and per-symbol rotation; used
    /// with the dual receive windows to extend the distance range.
    FsiTail,
}

impl Scheme {
    pub fn is_fsi(self) -> bool {
        matches!(self, Scheme::FsiRandom | Scheme::FsiTail)
    }

    pub fn uses_rotation(self) -> bool {
        self == Scheme::FsiTail
    }

    pub fn tag(self) -> &'static str {
        match self {
            Scheme::SensingOnly => "sensing_only",
            Scheme::PeriodicTd => "periodic_td",
            Scheme::Rtd => "rtd",
            Scheme::FsiRandom => "fsi",
            Scheme::FsiTail => "fsi_tail",
        }
    }
}

/// How RTD picks its `K` slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RtdMode {
    /// `K` distinct slots uniformly from all `MK`.
    #[default]
    Unconstrained,
    /// One uniformly random slot inside each group of `M`.
    OnePerGroup,
}

/// Which occasions carry sensing.
///
/// FSI schedules list the sensing code `alpha[k]` of each symbol; slotted
/// schedules list the ascending indices of the chirp slots out of `M*K`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub scheme: Scheme,
    pub m_codes: usize,
    pub k: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alpha: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub slots: Vec<usize>,
}

impl Schedule {
    /// Slots in a slotted frame (`M*K`).
    pub fn total_slots(&self) -> usize {
        self.m_codes * self.k
    }

    /// Uniform slow-time spacing in occasions, when the sensing occasions are
    /// periodic. The unambiguous Doppler band shrinks by this factor.
    pub fn slow_time_period(&self, cfg: &WaveformConfig) -> Option<usize> {
        match self.scheme {
            Scheme::PeriodicTd => Some(self.m_codes),
            Scheme::FsiTail => Some(cfg.occasions_per_symbol()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_codes < 2 || self.k == 0 {
            return Err(Error::Schedule("need M >= 2 and K >= 1".into()));
        }
        if self.scheme.is_fsi() {
            if self.alpha.len() != self.k || self.alpha.iter().any(|&a| a >= self.m_codes) {
                return Err(Error::Schedule(
                    "FSI schedule needs K codes in [0, M)".into(),
                ));
            }
            if self.scheme == Scheme::FsiTail && self.alpha.iter().any(|&a| a != self.m_codes - 1) {
                return Err(Error::Schedule("tail schedule must use code M-1".into()));
            }
        } else {
            let total = self.total_slots();
            if self.slots.windows(2).any(|w| w[0] >= w[1]) || self.slots.iter().any(|&s| s >= total)
            {
                return Err(Error::Schedule(
                    "slots must be strictly increasing and < M*K".into(),
                ));
            }
            let expected = if self.scheme == Scheme::SensingOnly {
                total
            } else {
                self.k
            };
            if self.slots.len() != expected {
                return Err(Error::Schedule(format!(
                    "expected {expected} sensing slots, got {}",
                    self.slots.len()
                )));
            }
        }
        Ok(())
    }
}

pub fn make_schedule(
    scheme: Scheme,
    m_codes: usize,
    k: usize,
    rtd_mode: RtdMode,
    rng: &mut impl Rng,
) -> Result<Schedule> {
    if m_codes < 2 || k == 0 {
        return Err(Error::InvalidArgument(format!(
            "schedule needs M >= 2 and K >= 1 (got M = {m_codes}, K = {k})"
        )));
    }
    let total = m_codes * k;
    let (alpha, slots) = match scheme {
        Scheme::SensingOnly => (Vec::new(), (0..total).collect()),
        Scheme::PeriodicTd => (Vec::new(), (0..k).map(|g| g * m_codes).collect()),
        Scheme::Rtd => match rtd_mode {
            RtdMode::Unconstrained => {
                let mut s = sample(rng, total, k).into_vec();
                s.sort_unstable();
                (Vec::new(), s)
            }
            RtdMode::OnePerGroup => (
                Vec::new(),
                (0..k)
                    .map(|g| g * m_codes + rng.random_range(0..m_codes))
                    .collect(),
            ),
        },
        Scheme::FsiRandom => (
            (0..k).map(|_| rng.random_range(0..m_codes)).collect(),
            Vec::new(),
        ),
        Scheme::FsiTail => (vec![m_codes - 1; k], Vec::new()),
    };
    Ok(Schedule {
        scheme,
        m_codes,
        k,
        alpha,
        slots,
    })
}

/// Positions of the sensing occasions on the physical slow-time grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OccasionGrid {
    pub indices: Vec<usize>,
    pub total: usize,
}

/// Slotted schemes map slot `j` to grid index `j` on `M*K` occasions. An FSI
/// symbol spans `M + n_cp/L` occasions with the CP first, so symbol `k` with code
/// `alpha` sits at `k (M + n_cp/L) + n_cp/L + alpha`.
pub fn occasion_grid_indices(schedule: &Schedule, cfg: &WaveformConfig) -> Result<OccasionGrid> {
    if schedule.scheme.is_fsi() {
        let l = cfg.l_occ();
        if !cfg.n_cp.is_multiple_of(l) {
            return Err(Error::Config(format!(
                "n_cp ({}) must be a multiple of L ({l})",
                cfg.n_cp
            )));
        }
        let cp = cfg.n_cp / l;
        let per = schedule.m_codes + cp;
        Ok(OccasionGrid {
            indices: schedule
                .alpha
                .iter()
                .enumerate()
                .map(|(k, &a)| k * per + cp + a)
                .collect(),
            total: schedule.k * per,
        })
    } else {
        Ok(OccasionGrid {
            indices: schedule.slots.clone(),
            total: schedule.total_slots(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sched(scheme: Scheme, m: usize, k: usize, seed: u64) -> Schedule {
        make_schedule(
            scheme,
            m,
            k,
            RtdMode::Unconstrained,
            &mut stream(seed, Stream::Schedule),
        )
        .unwrap()
    }

    #[test]
    fn periodic_and_tail() {
        assert_eq!(sched(Scheme::PeriodicTd, 4, 3, 0).slots, vec![0, 4, 8]);
        assert_eq!(sched(Scheme::FsiTail, 4, 2, 0).alpha, vec![3, 3]);
        assert_eq!(
            sched(Scheme::SensingOnly, 2, 3, 0).slots,
            (0..6).collect::<Vec<_>>()
        );
    }

    #[test]
    fn rejects_degenerate_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(make_schedule(Scheme::Rtd, 1, 3, RtdMode::Unconstrained, &mut rng).is_err());
        assert!(make_schedule(Scheme::Rtd, 4, 0, RtdMode::Unconstrained, &mut rng).is_err());
    }

    #[test]
    fn rtd_golden_seed_42() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let s = make_schedule(Scheme::Rtd, 4, 80, RtdMode::Unconstrained, &mut rng).unwrap();
        let golden: Vec<usize> =
            serde_json::from_str(include_str!("../tests/golden/rtd_m4_k80_seed42.json")).unwrap();
        assert_eq!(s.slots, golden);
    }

    #[test]
    fn grid_for_tail_and_periodic() {
        let cfg = WaveformConfig::default();
        let g = occasion_grid_indices(&sched(Scheme::FsiTail, 4, 2, 0), &cfg).unwrap();
        assert_eq!(g.indices, vec![4, 9]);
        assert_eq!(g.total, 10);
        let g = occasion_grid_indices(&sched(Scheme::PeriodicTd, 4, 3, 0), &cfg).unwrap();
        assert_eq!(g.indices, vec![0, 4, 8]);
        assert_eq!(g.total, 12);
    }

    #[test]
    fn default_frames_share_total_time() {
        let cfg = WaveformConfig::default();
        let rtd = occasion_grid_indices(&sched(Scheme::Rtd, 4, 80, 1), &cfg).unwrap();
        let fsi = occasion_grid_indices(&sched(Scheme::FsiRandom, 4, 64, 1), &cfg).unwrap();
        assert_eq!(rtd.total, 320);
        assert_eq!(fsi.total, 320);
    }

    #[test]
    fn fsi_grid_rejects_fractional_cp() {
        let cfg = WaveformConfig {
            n_cp: 100,
            ..WaveformConfig::default()
        };
        assert!(occasion_grid_indices(&sched(Scheme::FsiTail, 4, 2, 0), &cfg).is_err());
    }

    proptest! {
        #[test]
        fn grid_invariants(seed in 0u64..1000, k in 1usize..40, m in 2usize..9, which in 0usize..5, per_group in proptest::bool::ANY) {
            let scheme = [Scheme::SensingOnly, Scheme::PeriodicTd, Scheme::Rtd, Scheme::FsiRandom, Scheme::FsiTail][which];
            let mode = if per_group { RtdMode::OnePerGroup } else { RtdMode::Unconstrained };
            let s = make_schedule(scheme, m, k, mode, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            s.validate().unwrap();
            let again = make_schedule(scheme, m, k, mode, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            prop_assert_eq!(&s, &again);
            let cfg = WaveformConfig::with_grid(16 * m, m);
            let g = occasion_grid_indices(&s, &cfg).unwrap();
            prop_assert!(g.indices.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(g.indices.iter().all(|&i| i < g.total));
            let expected = if scheme == Scheme::SensingOnly { m * k } else { k };
            prop_assert_eq!(g.indices.len(), expected);
            if scheme.is_fsi() {
                let per = cfg.occasions_per_symbol();
                for (sym, &i) in g.indices.iter().enumerate() {
                    prop_assert_eq!(i / per, sym);
                }
            }
        }
    }
}
