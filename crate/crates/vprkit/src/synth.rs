//! Synthetic worlds and traverses.
//!
//! A world is a set of places, each with a unit-norm latent appearance
//! vector. A traverse walks places according to a script and emits one
//! descriptor per frame; speed changes, stops, loops, and exploration
//! segments reproduce the classic structures seen in similarity matrices of
//! sequential datasets. All randomness comes from explicitly seeded ChaCha12
//! generators, with a fixed draw order (row-major, events in order), so
//! results are reproducible.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{build_ground_truth, DescriptorMatrix, GroundTruth};
use crate::error::{Error, Result};

/// Norm of the perturbation applied to the second place of an aliasing pair.
const ALIAS_PERTURBATION_NORM: f64 = 0.01;

#[derive(Debug, Clone)]
pub struct WorldConfig {
    pub n_places: usize,
    pub latent_dim: usize,
    /// Number of place pairs forced to near-identical appearance. Pair `k`
    /// aliases place `k` with place `n_places - 1 - k`, so aliased places sit
    /// far apart along a linear traverse.
    pub aliasing_pairs: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct World {
    config: WorldConfig,
    latents: DescriptorMatrix,
}

impl World {
    pub fn n_places(&self) -> usize {
        self.config.n_places
    }

    pub fn latent_dim(&self) -> usize {
        self.config.latent_dim
    }

    pub fn config(&self) -> &WorldConfig {
        &self.config
    }

    pub fn latents(&self) -> &DescriptorMatrix {
        &self.latents
    }

    pub fn latent(&self, place: usize) -> &[f64] {
        self.latents.row(place)
    }
}

fn standard_normal_vec(rng: &mut ChaCha12Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

fn normalize_in_place(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    } else {
        v[0] = 1.0;
    }
}

/// Draws the place latents: i.i.d. standard normal rows, unit-normalized,
/// then each aliasing pair copies one latent plus a perturbation of norm
/// 0.01. Deterministic in the seed.
pub fn generate_world(config: &WorldConfig) -> Result<World> {
    if config.n_places < 2 {
        return Err(Error::Param("a world needs at least 2 places".into()));
    }
    if config.latent_dim < 2 {
        return Err(Error::Param("latent dimension must be at least 2".into()));
    }
    if config.aliasing_pairs > config.n_places / 2 {
        return Err(Error::Param(format!(
            "{} aliasing pairs exceed n_places/2 = {}",
            config.aliasing_pairs,
            config.n_places / 2
        )));
    }

    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let mut rows: Vec<Vec<f64>> = (0..config.n_places)
        .map(|_| {
            let mut row = standard_normal_vec(&mut rng, config.latent_dim);
            normalize_in_place(&mut row);
            row
        })
        .collect();

    for k in 0..config.aliasing_pairs {
        let src = k;
        let dst = config.n_places - 1 - k;
        let mut perturbation = standard_normal_vec(&mut rng, config.latent_dim);
        normalize_in_place(&mut perturbation);
        rows[dst] = rows[src]
            .iter()
            .zip(&perturbation)
            .map(|(base, p)| base + ALIAS_PERTURBATION_NORM * p)
            .collect();
    }

    Ok(World {
        config: config.clone(),
        latents: DescriptorMatrix::from_rows(&rows)?,
    })
}

/// One scripted segment of a traverse. Ranges are half-open place intervals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraverseEvent {
    /// Walk the range, emitting every `step`-th place.
    Visit {
        start: usize,
        end: usize,
        step: usize,
    },
    /// Remain at `place` for `duration` frames.
    Stop { place: usize, duration: usize },
    /// Revisit the range (step 1).
    Loop { start: usize, end: usize },
    /// Pass through unmapped terrain: emits one frame per place in the
    /// range, each with a fresh random latent and no place id.
    Skip { start: usize, end: usize },
}

/// A traverse script: the event list plus the appearance condition of the
/// run (per-dimension affine transform) and additive Gaussian noise.
#[derive(Debug, Clone)]
pub struct TraverseScript {
    pub events: Vec<TraverseEvent>,
    pub noise_sigma: f64,
    pub condition_bias: Vec<f64>,
    pub condition_scale: Vec<f64>,
}

impl TraverseScript {
    /// Identity condition (zero bias, unit scale) and no noise.
    pub fn identity(events: Vec<TraverseEvent>, latent_dim: usize) -> Self {
        Self {
            events,
            noise_sigma: 0.0,
            condition_bias: vec![0.0; latent_dim],
            condition_scale: vec![1.0; latent_dim],
        }
    }

    pub fn with_noise(mut self, sigma: f64) -> Self {
        self.noise_sigma = sigma;
        self
    }

    pub fn with_condition(mut self, scale: Vec<f64>, bias: Vec<f64>) -> Self {
        self.condition_scale = scale;
        self.condition_bias = bias;
        self
    }

    fn validate(&self, n_places: usize, latent_dim: usize) -> Result<()> {
        if self.noise_sigma < 0.0 || !self.noise_sigma.is_finite() {
            return Err(Error::Param("noise sigma must be finite and >= 0".into()));
        }
        if self.condition_bias.len() != latent_dim || self.condition_scale.len() != latent_dim {
            return Err(Error::Dim {
                expected: latent_dim,
                actual: self.condition_bias.len().max(self.condition_scale.len()),
            });
        }
        if self.condition_scale.iter().any(|s| *s <= 0.0 || !s.is_finite()) {
            return Err(Error::Param("condition scale must be positive".into()));
        }
        for event in &self.events {
            let ok = match *event {
                TraverseEvent::Visit { start, end, step } => {
                    step >= 1 && start < end && end <= n_places
                }
                TraverseEvent::Stop { place, duration } => duration >= 1 && place < n_places,
                TraverseEvent::Loop { start, end } | TraverseEvent::Skip { start, end } => {
                    start < end && end <= n_places
                }
            };
            if !ok {
                return Err(Error::Param(format!(
                    "event {event:?} references places outside 0..{n_places} or has a zero span"
                )));
            }
        }
        Ok(())
    }
}

/// A generated frame sequence: one descriptor per frame plus the place each
/// frame shows (`None` for exploration frames).
#[derive(Debug, Clone)]
pub struct Traverse {
    pub descriptors: DescriptorMatrix,
    pub place_ids: Vec<Option<usize>>,
}

impl Traverse {
    pub fn len(&self) -> usize {
        self.place_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.place_ids.is_empty()
    }
}

/// Expands a script into frames. Per frame the descriptor is
/// `scale * latent + bias + sigma * g` with `g` standard normal. The noise
/// stream is seeded by `seed`, so database and query runs of the same world
/// stay independent.
pub fn generate_traverse(world: &World, script: &TraverseScript, seed: u64) -> Result<Traverse> {
    script.validate(world.n_places(), world.latent_dim())?;
    let dim = world.latent_dim();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);

    let mut place_ids: Vec<Option<usize>> = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();

    let emit = |place: Option<usize>, rng: &mut ChaCha12Rng, rows: &mut Vec<Vec<f64>>| {
        let base: Vec<f64> = match place {
            Some(p) => world.latent(p).to_vec(),
            None => {
                let mut fresh = standard_normal_vec(rng, dim);
                normalize_in_place(&mut fresh);
                fresh
            }
        };
        let noise = standard_normal_vec(rng, dim);
        let row: Vec<f64> = (0..dim)
            .map(|m| {
                script.condition_scale[m] * base[m]
                    + script.condition_bias[m]
                    + script.noise_sigma * noise[m]
            })
            .collect();
        rows.push(row);
    };

    for event in &script.events {
        match *event {
            TraverseEvent::Visit { start, end, step } => {
                let mut place = start;
                while place < end {
                    place_ids.push(Some(place));
                    emit(Some(place), &mut rng, &mut rows);
                    place += step;
                }
            }
            TraverseEvent::Stop { place, duration } => {
                for _ in 0..duration {
                    place_ids.push(Some(place));
                    emit(Some(place), &mut rng, &mut rows);
                }
            }
            TraverseEvent::Loop { start, end } => {
                for place in start..end {
                    place_ids.push(Some(place));
                    emit(Some(place), &mut rng, &mut rows);
                }
            }
            TraverseEvent::Skip { start, end } => {
                for _ in start..end {
                    place_ids.push(None);
                    emit(None, &mut rng, &mut rows);
                }
            }
        }
    }

    if rows.is_empty() {
        return Err(Error::Param("script produced no frames".into()));
    }

    Ok(Traverse {
        descriptors: DescriptorMatrix::from_rows(&rows)?,
        place_ids,
    })
}

/// Ground truth between two traverses of the same world: a cell is true when
/// both frames show the same mapped place. Exploration frames never match.
pub fn derive_gt(db: &Traverse, q: &Traverse, soft_radius: (usize, usize)) -> Result<GroundTruth> {
    let mut pairs = Vec::new();
    for (i, db_place) in db.place_ids.iter().enumerate() {
        for (j, q_place) in q.place_ids.iter().enumerate() {
            if let (Some(a), Some(b)) = (db_place, q_place) {
                if a == b {
                    pairs.push((i, j));
                }
            }
        }
    }
    build_ground_truth(&pairs, (db.len(), q.len()), soft_radius)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::similarity::{similarity_matrix, Metric};

    fn cosine(a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (na * nb)
    }

    #[test]
    fn world_is_deterministic_in_seed() {
        let config = WorldConfig {
            n_places: 8,
            latent_dim: 16,
            aliasing_pairs: 2,
            seed: 7,
        };
        let a = generate_world(&config).unwrap();
        let b = generate_world(&config).unwrap();
        assert_eq!(a.latents(), b.latents());
    }

    #[test]
    fn aliasing_creates_exactly_one_near_duplicate_pair() {
        let world = generate_world(&WorldConfig {
            n_places: 10,
            latent_dim: 32,
            aliasing_pairs: 1,
            seed: 3,
        })
        .unwrap();
        let mut high = Vec::new();
        for i in 0..10 {
            for j in (i + 1)..10 {
                if cosine(world.latent(i), world.latent(j)) > 0.99 {
                    high.push((i, j));
                }
            }
        }
        assert_eq!(high, vec![(0, 9)]);
    }

    #[test]
    fn unaliased_places_stay_dissimilar_over_many_seeds() {
        // Monte-Carlo oracle: two random unit vectors in 64 dimensions are
        // nearly orthogonal with overwhelming probability.
        for seed in 0..100 {
            let world = generate_world(&WorldConfig {
                n_places: 2,
                latent_dim: 64,
                aliasing_pairs: 0,
                seed,
            })
            .unwrap();
            let c = cosine(world.latent(0), world.latent(1)).abs();
            assert!(c < 0.9, "seed {seed} produced |cosine| = {c}");
        }
    }

    #[test]
    fn zero_noise_visit_reproduces_latents_exactly() {
        let world = generate_world(&WorldConfig {
            n_places: 6,
            latent_dim: 8,
            aliasing_pairs: 0,
            seed: 11,
        })
        .unwrap();
        let script = TraverseScript::identity(
            vec![TraverseEvent::Visit {
                start: 0,
                end: 5,
                step: 1,
            }],
            8,
        );
        let traverse = generate_traverse(&world, &script, 42).unwrap();
        assert_eq!(traverse.len(), 5);
        for i in 0..5 {
            assert_eq!(traverse.descriptors.row(i), world.latent(i));
            assert_eq!(traverse.place_ids[i], Some(i));
        }
    }

    #[test]
    fn stop_emits_repeated_place_and_a_vertical_gt_line() {
        let world = generate_world(&WorldConfig {
            n_places: 6,
            latent_dim: 8,
            aliasing_pairs: 0,
            seed: 1,
        })
        .unwrap();
        // database stops at place 2 for 3 frames, query just walks through
        let db_script = TraverseScript::identity(
            vec![
                TraverseEvent::Visit {
                    start: 0,
                    end: 2,
                    step: 1,
                },
                TraverseEvent::Stop {
                    place: 2,
                    duration: 3,
                },
                TraverseEvent::Visit {
                    start: 3,
                    end: 6,
                    step: 1,
                },
            ],
            8,
        );
        let q_script = TraverseScript::identity(
            vec![TraverseEvent::Visit {
                start: 0,
                end: 6,
                step: 1,
            }],
            8,
        );
        let db = generate_traverse(&world, &db_script, 100).unwrap();
        let q = generate_traverse(&world, &q_script, 200).unwrap();
        assert_eq!(&db.place_ids[2..5], &[Some(2), Some(2), Some(2)]);

        let gt = derive_gt(&db, &q, (0, 0)).unwrap();
        // the query column for place 2 has three consecutive true rows
        let col = 2;
        let rows: Vec<usize> = (0..db.len()).filter(|&i| gt.gt(i, col)).collect();
        assert_eq!(rows, vec![2, 3, 4]);

        // and with zero noise the same column of S holds a vertical line of
        // exact ones
        let s = similarity_matrix(&db.descriptors, &q.descriptors, Metric::Cosine).unwrap();
        for i in 2..5 {
            assert_eq!(s.get(i, col), 1.0);
        }
    }

    #[test]
    fn double_speed_query_yields_slope_two_gt_line() {
        let world = generate_world(&WorldConfig {
            n_places: 10,
            latent_dim: 8,
            aliasing_pairs: 0,
            seed: 5,
        })
        .unwrap();
        let db_script = TraverseScript::identity(
            vec![TraverseEvent::Visit {
                start: 0,
                end: 10,
                step: 1,
            }],
            8,
        );
        let q_script = TraverseScript::identity(
            vec![TraverseEvent::Visit {
                start: 0,
                end: 10,
                step: 2,
            }],
            8,
        );
        let db = generate_traverse(&world, &db_script, 100).unwrap();
        let q = generate_traverse(&world, &q_script, 200).unwrap();
        assert_eq!(q.len(), 5);
        let gt = derive_gt(&db, &q, (0, 0)).unwrap();
        // brute-force enumeration of matching indices
        for i in 0..db.len() {
            for j in 0..q.len() {
                assert_eq!(gt.gt(i, j), i == 2 * j, "cell ({i}, {j})");
            }
        }
    }

    #[test]
    fn skip_frames_have_no_place_and_all_false_gt_columns() {
        let world = generate_world(&WorldConfig {
            n_places: 8,
            latent_dim: 8,
            aliasing_pairs: 0,
            seed: 9,
        })
        .unwrap();
        let db_script = TraverseScript::identity(
            vec![TraverseEvent::Visit {
                start: 0,
                end: 8,
                step: 1,
            }],
            8,
        );
        let q_script = TraverseScript::identity(
            vec![
                TraverseEvent::Visit {
                    start: 0,
                    end: 3,
                    step: 1,
                },
                TraverseEvent::Skip { start: 3, end: 6 },
                TraverseEvent::Visit {
                    start: 6,
                    end: 8,
                    step: 1,
                },
            ],
            8,
        );
        let db = generate_traverse(&world, &db_script, 100).unwrap();
        let q = generate_traverse(&world, &q_script, 200).unwrap();
        assert_eq!(q.place_ids[3], None);
        let gt = derive_gt(&db, &q, (0, 0)).unwrap();
        for col in 3..6 {
            assert!((0..db.len()).all(|i| !gt.gt(i, col)), "column {col}");
        }
    }

    #[test]
    fn stops_in_both_runs_form_a_true_block() {
        let world = generate_world(&WorldConfig {
            n_places: 4,
            latent_dim: 8,
            aliasing_pairs: 0,
            seed: 2,
        })
        .unwrap();
        let stop_script = |duration| {
            TraverseScript::identity(
                vec![
                    TraverseEvent::Visit {
                        start: 0,
                        end: 1,
                        step: 1,
                    },
                    TraverseEvent::Stop { place: 1, duration },
                    TraverseEvent::Visit {
                        start: 2,
                        end: 4,
                        step: 1,
                    },
                ],
                8,
            )
        };
        let db = generate_traverse(&world, &stop_script(2), 100).unwrap();
        let q = generate_traverse(&world, &stop_script(3), 200).unwrap();
        let gt = derive_gt(&db, &q, (0, 0)).unwrap();
        for i in 1..3 {
            for j in 1..4 {
                assert!(gt.gt(i, j), "block cell ({i}, {j})");
            }
        }
    }

    #[test]
    fn loop_in_db_yields_nonconsecutive_true_rows() {
        let world = generate_world(&WorldConfig {
            n_places: 6,
            latent_dim: 8,
            aliasing_pairs: 0,
            seed: 4,
        })
        .unwrap();
        let db_script = TraverseScript::identity(
            vec![
                TraverseEvent::Visit {
                    start: 0,
                    end: 6,
                    step: 1,
                },
                TraverseEvent::Loop { start: 0, end: 3 },
            ],
            8,
        );
        let q_script = TraverseScript::identity(
            vec![TraverseEvent::Visit {
                start: 0,
                end: 6,
                step: 1,
            }],
            8,
        );
        let db = generate_traverse(&world, &db_script, 100).unwrap();
        let q = generate_traverse(&world, &q_script, 200).unwrap();
        let gt = derive_gt(&db, &q, (0, 0)).unwrap();
        for col in 0..3 {
            let rows: Vec<usize> = (0..db.len()).filter(|&i| gt.gt(i, col)).collect();
            assert_eq!(rows.len(), 2, "column {col}");
            assert!(rows[1] - rows[0] > 1, "rows {rows:?} must not be consecutive");
        }
    }

    #[test]
    fn rejects_out_of_world_events() {
        let world = generate_world(&WorldConfig {
            n_places: 4,
            latent_dim: 4,
            aliasing_pairs: 0,
            seed: 0,
        })
        .unwrap();
        let script = TraverseScript::identity(
            vec![TraverseEvent::Visit {
                start: 0,
                end: 5,
                step: 1,
            }],
            4,
        );
        assert!(generate_traverse(&world, &script, 0).is_err());
    }
}
