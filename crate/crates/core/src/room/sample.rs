//! Scenario sampling under the fixed random conditions.
//!
//! Every field comes from a uniform distribution: floor area U(10, 50) m^2,
//! height U(2.5, 5.0) m, reverberation time U(0.2, 0.6) s, loopback
//! propagation delay U(0.01, 0.1) s, and, for playback kinds only,
//! signal-to-interference ratio U(-12, 3) dB. The floor's aspect ratio is
//! drawn from U(0.5, 2.0) since a shoebox needs a shape, not just an area.
//! Positions are rejection-sampled until they respect a 0.1 m wall margin
//! and 5 cm pairwise separation.

use rand_core::RngCore;

use crate::error::{Error, Result};
use crate::rng;

use super::{RoomSpec, ScenarioKind, ScenarioSpec};

/// Wall margin every sampled position keeps, in metres.
pub const WALL_MARGIN: f64 = 0.1;
/// Minimum pairwise distance between user, speaker and microphone.
const MIN_SEPARATION: f64 = 0.05;
const MAX_TRIES: usize = 1000;

/// Draws a complete scenario deterministically from `rng_seed`.
pub fn sample_scenario(kind: ScenarioKind, rng_seed: u64) -> Result<ScenarioSpec> {
    let mut rng = rng::chacha(rng_seed);

    let area = rng::uniform(&mut rng, 10.0, 50.0);
    let aspect = rng::uniform(&mut rng, 0.5, 2.0);
    let height = rng::uniform(&mut rng, 2.5, 5.0);
    let rt60 = rng::uniform(&mut rng, 0.2, 0.6);
    let room = RoomSpec::from_floor(area, aspect, height, rt60);

    let propagation_delay = rng::uniform(&mut rng, 0.01, 0.1);
    let sir_db = if kind.is_playback() {
        Some(rng::uniform(&mut rng, -12.0, 3.0))
    } else {
        None
    };

    let user_pos = place(&mut rng, &room, &[])?;
    let speaker_pos = place(&mut rng, &room, &[user_pos])?;
    let mic_pos = place(&mut rng, &room, &[user_pos, speaker_pos])?;

    Ok(ScenarioSpec {
        kind,
        room,
        user_pos,
        speaker_pos,
        mic_pos,
        propagation_delay,
        sir_db,
        seed: rng_seed,
    })
}

fn place(rng: &mut impl RngCore, room: &RoomSpec, taken: &[[f64; 3]]) -> Result<[f64; 3]> {
    for _ in 0..MAX_TRIES {
        let p = [
            rng::uniform(rng, WALL_MARGIN, room.length - WALL_MARGIN),
            rng::uniform(rng, WALL_MARGIN, room.width - WALL_MARGIN),
            rng::uniform(rng, WALL_MARGIN, room.height - WALL_MARGIN),
        ];
        let clear = taken.iter().all(|q| {
            let d2: f64 = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
            d2 >= MIN_SEPARATION * MIN_SEPARATION
        });
        if clear {
            return Ok(p);
        }
    }
    Err(Error::Geometry(format!(
        "position sampling exhausted {MAX_TRIES} tries in room {:?}",
        room.dims()
    )))
}
