//! Model trajectories and synthetic sessions.

use influence_core::dynamics::{step, DynamicsConfig};
use influence_core::evaluation::derive_seed;
use influence_core::ingest::session_to_json;
use influence_core::synthetic::{constant_session, dynamics_session, identity_map_session, random_stochastic};
use influence_core::{InfluenceMatrix, TeamSession};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{Generator, InitialMatrix, RunConfig};
use crate::inputs::Failure;
use crate::output::{num, OutputDir, Table};

fn trajectory(cfg: &RunConfig, run: usize) -> influence_core::Result<Vec<InfluenceMatrix>> {
    let s = &cfg.simulate;
    let model = DynamicsConfig::new(s.tau, s.model)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &["simulate", &run.to_string()]));
    let start = match s.initial {
        InitialMatrix::Random => random_stochastic(&mut rng, s.members),
        InitialMatrix::Uniform => InfluenceMatrix::uniform(s.members),
    };
    let mut out = vec![start];
    for _ in 0..s.steps {
        let next = step(&model, out.last().expect("nonempty"), &s.expertise)?;
        out.push(next);
    }
    Ok(out)
}

fn session(cfg: &RunConfig, team: &str) -> influence_core::Result<TeamSession> {
    let s = &cfg.simulate;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &["session", team]));
    let shape = s.shape();
    match s.generator {
        Generator::Dynamics => dynamics_session(&mut rng, team, &shape, &DynamicsConfig::new(s.tau, s.model)?),
        Generator::Constant => Ok(constant_session(&mut rng, team, &shape)),
        Generator::Identity => Ok(identity_map_session(&mut rng, team, &shape, s.noise)),
    }
}

pub fn run(cfg: &RunConfig, out: &mut OutputDir) -> anyhow::Result<Vec<Failure>> {
    let s = &cfg.simulate;
    let n = s.members;
    let runs: Vec<_> = (0..s.runs).into_par_iter().map(|r| trajectory(cfg, r)).collect();
    let mut failures = Vec::new();
    let mut matrices = Table::matrix(["run", "step"], n);
    let mut weights =
        Table::new(["run".to_string(), "step".to_string()].into_iter().chain((0..n).map(|i| format!("m{i}"))));
    for (r, traj) in runs.into_iter().enumerate() {
        let traj = match traj {
            Ok(t) => t,
            Err(e) => {
                failures.push(Failure::new(format!("run{r}"), e));
                continue;
            }
        };
        for (t, m) in traj.iter().enumerate() {
            let prefix = [r.to_string(), t.to_string()];
            matrices.push_matrix(&prefix, m.as_matrix());
            weights.push(prefix.into_iter().chain(m.diagonal().iter().map(|&d| num(d))).collect());
        }
    }
    out.csv("trajectory.csv", &matrices)?;
    out.csv("self_weights.csv", &weights)?;

    if s.sessions > 0 {
        let ids: Vec<String> = (0..s.sessions).map(|i| format!("sim{i:03}")).collect();
        let built: Vec<_> = ids.par_iter().map(|id| session(cfg, id)).collect();
        let mut reports = Table::matrix(["team", "round"], n);
        for (id, sess) in ids.iter().zip(built) {
            match sess {
                Ok(sess) => {
                    out.raw(&format!("sessions/{id}.json"), session_to_json(&sess).as_bytes())?;
                    for (r, round) in sess.rounds.iter().enumerate() {
                        if let Some(m) = &round.influence {
                            reports.push_matrix(&[id.clone(), (r + 1).to_string()], m.as_matrix());
                        }
                    }
                }
                Err(e) => failures.push(Failure::new(id.clone(), e)),
            }
        }
        out.csv("sessions.csv", &reports)?;
    }
    Ok(failures)
}
