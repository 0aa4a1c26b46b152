use super::{
    combine_speed, farm_variations, synthesize_reference_variations, ReferenceLattice, SigmaDistribution, WindError,
    WindSpeedSeries5Min,
};

pub const FIVE_MINUTES_S: u32 = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct FarmSpeedSeries {
    pub farm_id: u32,
    /// Consecutive windows share their boundary sample.
    pub speeds: Vec<f64>,
}

/// Fine-resolution speeds for every lattice farm over all 5-minute windows
/// of `inputs`. Each window has `steps_per_window` samples including both
/// ends; window `w` draws from substreams keyed by `w`.
pub fn synthesize_farm_speeds(
    lattice: &ReferenceLattice,
    psi: &SigmaDistribution,
    inputs: &[WindSpeedSeries5Min],
    steps_per_window: usize,
    seed: u64,
) -> Result<Vec<FarmSpeedSeries>, WindError> {
    if steps_per_window < 2 {
        return Err(WindError::TooShort(steps_per_window));
    }
    let series: Vec<&WindSpeedSeries5Min> = lattice
        .farm_ids
        .iter()
        .map(|id| {
            inputs
                .iter()
                .find(|s| s.farm_id == *id)
                .ok_or_else(|| WindError::InvalidInput(format!("no 5-minute speeds for wind farm {id}")))
        })
        .collect::<Result<_, _>>()?;
    let len = series.first().map_or(0, |s| s.values.len());
    if len < 2 {
        return Err(WindError::InvalidInput("5-minute speeds need at least two samples".into()));
    }
    if let Some(s) = series.iter().find(|s| s.values.len() != len || s.start != series[0].start) {
        return Err(WindError::InvalidInput(format!("wind farm {} is not aligned with the other farms", s.farm_id)));
    }

    let mut out: Vec<FarmSpeedSeries> = lattice
        .farm_ids
        .iter()
        .map(|&farm_id| FarmSpeedSeries {
            farm_id,
            speeds: Vec::with_capacity((len - 1) * (steps_per_window - 1) + 1),
        })
        .collect();
    for w in 0..len - 1 {
        let refs = synthesize_reference_variations(lattice.points.len(), psi, steps_per_window, seed, w as u64)?;
        let vars = farm_variations(lattice, &refs)?;
        for ((o, s), v) in out.iter_mut().zip(&series).zip(&vars) {
            let seg = combine_speed(s.values[w], s.values[w + 1], &v.values)?;
            let skip = usize::from(w > 0);
            o.speeds.extend_from_slice(&seg[skip..]);
        }
    }
    Ok(out)
}
