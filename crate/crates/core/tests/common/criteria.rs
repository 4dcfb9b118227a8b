//! Fast acceptance checks. Each returns a verdict with a one-line summary;
//! the test files assert on it and the acceptance report prints it.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use rand::Rng;
use sagin_sched::clustering::{
    kmeans_cluster, maintenance_step, optimal_cluster_count, should_recluster, ClusterConfig, ClusterState,
    MaintenanceEvent,
};
use sagin_sched::env::{AgentAction, Action, Env, EnvConfig, ScenarioPreset, ViolationReason};
use sagin_sched::geometry::{centroid, Area, Position};
use sagin_sched::link::{
    computing_delay, data_rate, path_loss_db, propagation_delay, total_delay, transmission_delay, ChannelParams,
    ComputeDevice, DeviceId,
};
use sagin_sched::marl::{actor_gradient, critic_target, critic_update, JointLayout, Transition};
use sagin_sched::mobility::{advance_mobility, MobilityState};
use sagin_sched::nn::{soft_update, AdamConfig, AdamState, DenseNet, Matrix, OutputHead};
use sagin_sched::rng::{stream_indexed, SimRng, Stream};
use sagin_sched::{task_profit, ProfitParams, Task};

use super::des::{Decision, Fate, Micro};
use super::formulas as f;
use super::nets::{central, random_matrix, random_net, weighted_output};
use super::rel_err;

pub const FORMULA_TOL: f64 = 1e-9;
pub const FORMULA_DRAWS: usize = 200;
pub const COUNT_DRAWS: usize = 200;
pub const KMEANS_RUNS: usize = 50;
pub const WALK_STEPS: u64 = 10_000;
pub const MICRO_SCENARIOS: usize = 50;
pub const GRAD_NETS: u64 = 100;
pub const GRAD_TOL: f64 = 1e-4;
pub const BOWL_TOL: f64 = 0.01;
pub const BOWL_MAX_STEPS: usize = 2000;

#[derive(Debug, Clone)]
pub struct Verdict {
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }

    #[track_caller]
    pub fn assert(&self) {
        assert!(self.pass, "{}", self.detail);
    }
}

fn rng(salt: u64) -> SimRng {
    stream_indexed(0xACCE, Stream::Heuristic, salt)
}

fn task(bits: f64, cycles_per_bit: f64, deadline: f64) -> Task {
    Task {
        id: 0,
        origin_uav: 0,
        data_bits: bits,
        cycles_per_bit,
        deadline,
        arrival_slot: 0,
    }
}

fn device(id: DeviceId, hz: f64) -> ComputeDevice {
    ComputeDevice {
        id,
        position: Position::new(0.0, 0.0, 0.0),
        capacity_hz: hz,
    }
}

fn log_range<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..=hi.ln())).exp()
}

/// Every closed form against its oracle on random inputs, plus the exact
/// boundary cases.
pub fn formula_oracles() -> Verdict {
    let mut r = rng(1);
    let mut worst = [0.0f64; 7];
    for _ in 0..FORMULA_DRAWS {
        let bits = log_range(&mut r, 1e3, 1e8);
        let cpb = log_range(&mut r, 1.0, 5e3);
        let deadline = r.random_range(0.0..=0.5);
        let lambda = r.random_range(0.0..=20.0);
        let t = task(bits, cpb, deadline);
        let p = ProfitParams {
            delay_sensitivity: lambda,
        };
        worst[0] = worst[0].max(rel_err(task_profit(&t, &p), f::profit(bits, cpb, deadline, lambda), 0.0));

        let mut ch = ChannelParams::base_station();
        ch.reference_distance = r.random_range(0.5..=10.0);
        ch.carrier_frequency = log_range(&mut r, 1e8, 4e10);
        ch.path_loss_exponent = r.random_range(1.5..=5.0);
        let d = log_range(&mut r, 0.1, 2e6);
        let x = r.random_range(-8.0..=8.0);
        let pl = path_loss_db(d, &ch, x).unwrap();
        let oracle = f::path_loss(d, ch.reference_distance, ch.carrier_frequency, ch.path_loss_exponent, x);
        worst[1] = worst[1].max(rel_err(pl, oracle, 1.0));

        ch.bandwidth = log_range(&mut r, 1e5, 1e9);
        ch.tx_power = log_range(&mut r, 1e-3, 100.0);
        ch.tx_gain = log_range(&mut r, 0.1, 1e3);
        ch.rx_gain = log_range(&mut r, 0.1, 1e4);
        ch.noise_power = log_range(&mut r, 1e-16, 1e-9);
        let loss = r.random_range(20.0..=220.0);
        let rate = data_rate(loss, &ch);
        let oracle = f::rate(ch.bandwidth, ch.tx_power, ch.tx_gain, ch.rx_gain, ch.noise_power, loss);
        worst[2] = worst[2].max(rel_err(rate, oracle, 0.0));

        let dev = match r.random_range(0..3) {
            0 => DeviceId::Local,
            1 => DeviceId::BaseStation(r.random_range(1..=6)),
            _ => DeviceId::Satellite,
        };
        let dist = r.random_range(0.0..=2e6);
        let sat = dev == DeviceId::Satellite;
        worst[3] = worst[3].max(rel_err(propagation_delay(dev, dist), f::propagation(sat, dist), 1e-300));

        let link = log_range(&mut r, 1e5, 1e9);
        let tx = transmission_delay(&t, link, dev, dist).unwrap();
        let oracle = f::transmission(bits, link, sat, dev == DeviceId::Local, dist);
        worst[4] = worst[4].max(rel_err(tx, oracle, 1e-300));

        let hz = log_range(&mut r, 1e8, 1e11);
        let comp = computing_delay(&t, &device(dev, hz));
        worst[5] = worst[5].max(rel_err(comp, f::computing(bits, cpb, hz), 0.0));

        let q = r.random_range(0.0..=1.0);
        worst[6] = worst[6].max(rel_err(total_delay(q, tx, comp), f::total(q, tx, comp), 1e-300));
    }

    let mut exact_failures = Vec::new();
    let mut exact = |name: &str, ok: bool| {
        if !ok {
            exact_failures.push(name.to_string());
        }
    };
    let none = ProfitParams {
        delay_sensitivity: 0.0,
    };
    exact("profit without sensitivity", task_profit(&task(100.0, 10.0, 5.0), &none) == 1000.0);
    exact(
        "profit at zero deadline",
        task_profit(&task(90e6, 37.5, 0.0), &ProfitParams::default()) == 90e6 * 37.5,
    );
    let bs = ChannelParams::base_station();
    let reference = 20.0 * (4.0 * PI * bs.reference_distance / bs.wavelength()).log10();
    exact("loss at the reference distance", path_loss_db(bs.reference_distance, &bs, 0.0).unwrap() == reference);
    exact(
        "loss clamps below the reference distance",
        path_loss_db(0.25, &bs, 0.0).unwrap() == path_loss_db(bs.reference_distance, &bs, 0.0).unwrap(),
    );
    let mut unit = ChannelParams::base_station();
    unit.tx_gain = 1.0;
    unit.rx_gain = 1.0;
    unit.tx_power = unit.noise_power;
    exact("unit signal-to-noise gives the bandwidth", data_rate(0.0, &unit) == unit.bandwidth);
    unit.tx_power = 3.0 * unit.noise_power;
    exact("signal-to-noise of three doubles it", data_rate(0.0, &unit) == 2.0 * unit.bandwidth);
    exact("satellite at zero distance", propagation_delay(DeviceId::Satellite, 0.0) == 0.0);
    exact(
        "local execution has no transmission",
        transmission_delay(&task(1e7, 1.0, 1.0), 0.0, DeviceId::Local, 5.0).unwrap() == 0.0,
    );
    let one_second = task(2e9, 10.0, 1.0);
    exact(
        "workload equal to capacity",
        computing_delay(&one_second, &device(DeviceId::BaseStation(1), 2e10)) == 1.0,
    );
    let w = task(37e6, 123.0, 1.0);
    exact(
        "doubled capacity halves the delay",
        computing_delay(&w, &device(DeviceId::Satellite, 6e10))
            == computing_delay(&w, &device(DeviceId::Satellite, 3e10)) / 2.0,
    );
    exact("zero components", total_delay(0.0, 0.0, 0.0) == 0.0);
    exact(
        "component order",
        total_delay(0.25, 1.5, 0.125) == total_delay(0.125, 0.25, 1.5)
            && total_delay(0.25, 1.5, 0.125) == total_delay(1.5, 0.125, 0.25),
    );

    let derived = [
        rel_err(
            task_profit(
                &task(100.0, 10.0, 0.2),
                &ProfitParams {
                    delay_sensitivity: 5.0,
                },
            ),
            367.879_441_171_442_3,
            0.0,
        ),
        rel_err(
            path_loss_db(10.0 * bs.reference_distance, &ChannelParams { path_loss_exponent: 2.0, ..bs.clone() }, 0.0)
                .unwrap(),
            reference + 20.0,
            0.0,
        ),
        rel_err(propagation_delay(DeviceId::Satellite, 780e3), 2.601_799_942_545_586e-3, 0.0),
        rel_err(
            transmission_delay(&task(10e6, 1.0, 1.0), 10e6, DeviceId::Satellite, 780e3).unwrap(),
            1.0 + 2.601_799_942_545_586e-3,
            0.0,
        ),
        rel_err(computing_delay(&task(2e9, 1.0, 1.0), &device(DeviceId::Satellite, 20e9)), 0.1, 0.0),
        rel_err(total_delay(0.05, 1.0, 0.1), 1.15, 0.0),
    ];
    let derived_worst = derived.iter().copied().fold(0.0, f64::max);

    let max = worst.iter().copied().fold(derived_worst, f64::max);
    let pass = max < FORMULA_TOL && exact_failures.is_empty();
    Verdict::new(
        pass,
        format!(
            "{FORMULA_DRAWS} draws x 7 formulas, max rel err {max:.2e} (profit {:.1e}, loss {:.1e}, rate {:.1e}, \
             propagation {:.1e}, transmission {:.1e}, computing {:.1e}, total {:.1e}); exact cases failed: {:?}",
            worst[0], worst[1], worst[2], worst[3], worst[4], worst[5], worst[6], exact_failures
        ),
    )
}

/// Smallest count reaching the threshold, by walking up from one.
pub fn linear_count(n: usize, area: f64, radius: f64, threshold: f64) -> usize {
    let share = (n as f64 / area) * PI * radius * radius / n as f64;
    if share >= 1.0 {
        return 1;
    }
    let mut miss = 1.0;
    for c in 1..=n {
        miss *= 1.0 - share;
        if 1.0 - miss >= threshold {
            return c;
        }
    }
    n
}

pub fn cluster_count_search() -> Verdict {
    let mut r = rng(2);
    let mut mismatches = Vec::new();
    for _ in 0..COUNT_DRAWS {
        let n = r.random_range(1..=200);
        let side = log_range(&mut r, 100.0, 2e4);
        let radius = log_range(&mut r, 10.0, 5e3);
        let threshold = r.random_range(0.01..=0.99);
        let cfg = ClusterConfig {
            comm_radius: radius,
            coverage_threshold: threshold,
            ..ClusterConfig::default()
        };
        let got = optimal_cluster_count(n, side * side, &cfg).count;
        let want = linear_count(n, side * side, radius, threshold);
        if got != want {
            mismatches.push((n, side, radius, threshold, got, want));
        }
    }
    Verdict::new(
        mismatches.is_empty(),
        format!("{COUNT_DRAWS} draws, mismatches {mismatches:?}"),
    )
}

fn scatter<R: Rng>(n: usize, side: f64, r: &mut R) -> Vec<Position> {
    (0..n)
        .map(|_| Position::new(r.random_range(0.0..=side), r.random_range(0.0..=side), 100.0))
        .collect()
}

pub fn kmeans_monotone() -> Verdict {
    let mut increases = Vec::new();
    let mut iterations = 0;
    for run in 0..KMEANS_RUNS as u64 {
        let mut r = rng(100 + run);
        let n = r.random_range(2..=80);
        let k = r.random_range(1..=n.min(12));
        // a few dense blobs so Lloyd has work to do
        let pos: Vec<Position> = if run % 2 == 0 {
            scatter(n, 5000.0, &mut r)
        } else {
            let blobs = scatter(4, 5000.0, &mut r);
            (0..n)
                .map(|i| {
                    let b = blobs[i % 4];
                    Position::new(b.x + r.random_range(-300.0..=300.0), b.y + r.random_range(-300.0..=300.0), 100.0)
                })
                .collect()
        };
        let (state, report) = kmeans_cluster(&pos, k, &mut stream_indexed(run, Stream::Clustering, 0), &ClusterConfig::default());
        iterations += report.objective_history.len();
        for w in report.objective_history.windows(2) {
            if w[1] > w[0] {
                increases.push((run, w[0], w[1]));
            }
        }
        if state.check_partition(n).is_err() || state.cluster_count() != k {
            increases.push((run, f64::NAN, f64::NAN));
        }
    }
    Verdict::new(
        increases.is_empty(),
        format!("{KMEANS_RUNS} runs, {iterations} objective evaluations, increases {increases:?}"),
    )
}

/// Random walk of 20 UAVs with maintenance every slot and re-clustering on
/// schedule; the partition is checked after every step.
pub fn partition_walk() -> Verdict {
    let n = 20;
    let side = 2500.0;
    let area = Area::new(side);
    let cfg = ClusterConfig {
        comm_radius: 500.0,
        ..ClusterConfig::default()
    };
    let mut r = rng(3);
    let mut uavs: Vec<MobilityState> = scatter(n, side, &mut r)
        .into_iter()
        .map(|p| MobilityState {
            position: p,
            heading: r.random_range(0.0..std::f64::consts::TAU),
            speed: r.random_range(5.0..=40.0),
        })
        .collect();
    let k = optimal_cluster_count(n, side * side, &cfg).count;
    let mut cluster_rng = stream_indexed(3, Stream::Clustering, 0);
    let mut state = ClusterState::default();
    let (mut isolations, mut replacements, mut moves) = (0, 0, 0);
    for slot in 0..WALK_STEPS {
        let pos: Vec<Position> = uavs.iter().map(|u| u.position).collect();
        state = if should_recluster(slot, &cfg) {
            kmeans_cluster(&pos, k, &mut cluster_rng, &cfg).0
        } else {
            let (next, events) = maintenance_step(&state, &pos, slot, &cfg);
            for e in &events {
                match e {
                    MaintenanceEvent::Isolated { .. } => isolations += 1,
                    MaintenanceEvent::HeadReplaced { .. } => replacements += 1,
                    MaintenanceEvent::JoinRequest { .. } => moves += 1,
                    _ => {}
                }
            }
            next
        };
        if let Err(e) = state.check_partition(n) {
            return Verdict::new(false, format!("slot {slot}: {e}"));
        }
        if state.cluster_count() != k {
            return Verdict::new(false, format!("slot {slot}: {} clusters, expected {k}", state.cluster_count()));
        }
        for u in &mut uavs {
            *u = advance_mobility(u, 1.0, 0.5, &area, &mut r);
        }
    }
    let exercised = isolations > 0 && replacements > 0 && moves > 0;
    Verdict::new(
        exercised,
        format!(
            "{WALK_STEPS} steps, {k} clusters, partition held; joins {moves}, isolations {isolations}, \
             head replacements {replacements}"
        ),
    )
}

/// Hand-stepped expectation for one head drifting away from two fixed
/// members: the first slot at which the off-center streak reaches the
/// threshold.
fn expected_replacement(start: f64, speed: f64, threshold: u32, slots: u64) -> Option<(u64, usize)> {
    let mut streak = 0;
    for slot in 1..=slots {
        let xs = [0.0, 40.0, start + speed * slot as f64];
        let mean = (xs[0] + xs[1] + xs[2]) / 3.0;
        let closest = (0..3)
            .min_by(|&a, &b| (xs[a] - mean).abs().total_cmp(&(xs[b] - mean).abs()).then(a.cmp(&b)))
            .unwrap();
        if closest == 2 {
            streak = 0;
        } else {
            streak += 1;
            if streak >= threshold {
                return Some((slot, closest));
            }
        }
    }
    None
}

pub fn reelection_timing() -> Verdict {
    let mut failures = Vec::new();
    let mut cases = 0;
    for threshold in 1..=8u32 {
        for (start, speed) in [(60.0, 20.0), (45.0, 5.0), (30.0, 1.0), (100.0, 0.0)] {
            cases += 1;
            let cfg = ClusterConfig {
                comm_radius: 10_000.0,
                reelect_threshold: threshold,
                ..ClusterConfig::default()
            };
            let at = |slot: u64| {
                vec![
                    Position::new(0.0, 0.0, 100.0),
                    Position::new(40.0, 0.0, 100.0),
                    Position::new(start + speed * slot as f64, 0.0, 100.0),
                ]
            };
            let p0 = at(0);
            let mut state = ClusterState {
                clusters: vec![sagin_sched::clustering::Cluster {
                    head: 2,
                    members: BTreeSet::from([0, 1, 2]),
                    centroid: centroid(&p0).unwrap(),
                }],
                isolated: BTreeSet::new(),
                head_offcenter: [(2, 0)].into(),
            };
            let mut fired = None;
            for slot in 1..=20 {
                let (next, events) = maintenance_step(&state, &at(slot), slot, &cfg);
                if let Some(MaintenanceEvent::HeadReplaced { new, .. }) =
                    events.iter().find(|e| matches!(e, MaintenanceEvent::HeadReplaced { .. }))
                {
                    fired = Some((slot, *new));
                    break;
                }
                state = next;
            }
            let want = expected_replacement(start, speed, threshold, 20);
            if fired != want {
                failures.push((threshold, start, speed, fired, want));
            }
        }
    }
    Verdict::new(
        failures.is_empty(),
        format!("{cases} scripted drifts over thresholds 1..=8, mismatches {failures:?}"),
    )
}

/// Small worlds where queues contend: slow devices, long deadlines and one
/// base station often out of range.
pub fn micro_config(r: &mut SimRng) -> EnvConfig {
    EnvConfig {
        area_side: 800.0,
        n_uavs: r.random_range(1..=3),
        n_bs: r.random_range(1..=2),
        bs_capacity_range: [4.0, 8.0],
        bs_coverage_radius: 450.0,
        satellite_capacity: 12.0,
        local_capacity: 2.0,
        arrival_rate: r.random_range(5.0..=15.0),
        slot_seconds: 0.1,
        episode_slots: r.random_range(3..=8),
        task_size_range: [5.0, 60.0],
        workload_range: [100.0, 1500.0],
        deadline_range: [0.0, 900.0],
        ..EnvConfig::default()
    }
}

pub struct MicroRun {
    pub micro: Micro,
    pub env: Env,
}

/// Runs one scripted micro-episode; `None` when it spawned more than ten
/// tasks or none at all.
pub fn micro_run(index: u64) -> Option<MicroRun> {
    let mut r = rng(1000 + index);
    let cfg = micro_config(&mut r);
    let mut env = Env::new(cfg.clone(), ScenarioPreset::default(), index).unwrap();
    let bs_hz = env.topology().base_stations.iter().map(|b| b.capacity_hz).collect();
    let mut micro = Micro {
        n_uavs: cfg.n_uavs,
        n_bs: cfg.n_bs,
        slot_seconds: cfg.slot_seconds,
        episode_slots: cfg.episode_slots,
        sensitivity: env.profit_params().delay_sensitivity,
        local_hz: env.topology().local_capacity,
        bs_hz,
        sat_hz: env.topology().satellite.capacity_hz,
        slots: Vec::new(),
    };
    let priorities = [0.2, 0.5, 0.5, 0.8, -0.3, 1.4];
    while !env.is_done() {
        let mut decisions = Vec::new();
        let mut actions = Vec::new();
        for t in env.pending_tasks() {
            let a = r.random_range(0..cfg.n_bs + 2);
            let device = DeviceId::from_action_index(a, cfg.n_bs).unwrap();
            let priority = priorities[r.random_range(0..priorities.len())];
            let link = if a == 0 {
                None
            } else {
                Some(env.links(t.origin_uav)[a - 1])
            };
            decisions.push(Decision {
                task: *t,
                device,
                priority,
                rate: link.map_or(f64::INFINITY, |l| l.rate),
                distance: link.map_or(0.0, |l| l.distance),
            });
            actions.push(AgentAction {
                agent: t.origin_uav,
                task: t.id,
                action: Action { device, priority },
            });
        }
        micro.slots.push(decisions);
        env.step(&actions).unwrap();
    }
    let spawned = env.trace().total_spawned();
    (1..=10).contains(&spawned).then_some(MicroRun { micro, env })
}

fn env_fates(env: &Env) -> std::collections::BTreeMap<u64, Fate> {
    let trace = env.trace();
    let mut fates: std::collections::BTreeMap<u64, Fate> =
        trace.decisions.iter().map(|d| (d.task.id, Fate::Unfinished)).collect();
    for r in &trace.resolutions {
        let fate = match r.violation {
            None => Fate::OnTime {
                slot: r.slot,
                total: r.total,
                transmission: r.transmission,
                profit: r.profit,
            },
            Some(ViolationReason::DeadlineDrop) => Fate::Dropped { slot: r.slot },
            Some(ViolationReason::Expired) => Fate::Expired { slot: r.slot },
            Some(ViolationReason::Unreachable) => Fate::Unreachable { slot: r.slot },
        };
        fates.insert(r.task.id, fate);
    }
    fates
}

/// Tallies of every fate across the compared scenarios.
#[derive(Debug, Default)]
pub struct FateTally {
    pub on_time: usize,
    pub queued: usize,
    pub dropped: usize,
    pub expired: usize,
    pub unreachable: usize,
    pub unfinished: usize,
}

pub fn queue_oracle() -> Verdict {
    let mut compared = 0;
    let mut index = 0;
    let mut tally = FateTally::default();
    let mut mismatches = Vec::new();
    while compared < MICRO_SCENARIOS {
        index += 1;
        let Some(run) = micro_run(index) else { continue };
        compared += 1;
        let want = run.micro.simulate();
        let got = env_fates(&run.env);
        let trace = run.env.trace();
        if got != want.fates {
            mismatches.push(format!("scenario {index}: fates {got:?} vs oracle {:?}", want.fates));
        }
        if trace.rewards != want.rewards {
            mismatches.push(format!("scenario {index}: rewards {:?} vs oracle {:?}", trace.rewards, want.rewards));
        }
        let env_total: f64 = trace.rewards.iter().sum();
        let oracle_total: f64 = want.rewards.iter().sum();
        if env_total != oracle_total {
            mismatches.push(format!("scenario {index}: episode reward {env_total} vs {oracle_total}"));
        }
        let unfinished = want.fates.values().filter(|f| matches!(f, Fate::Unfinished)).count();
        if trace.unfinished != unfinished {
            mismatches.push(format!("scenario {index}: unfinished {} vs {unfinished}", trace.unfinished));
        }
        for (id, f) in &want.fates {
            match f {
                Fate::OnTime { total, transmission, .. } => {
                    tally.on_time += 1;
                    let d = run.micro.slots.iter().flatten().find(|d| d.task.id == *id).unwrap();
                    let compute = d.task.workload() / match d.device {
                        DeviceId::Local => run.micro.local_hz,
                        DeviceId::BaseStation(b) => run.micro.bs_hz[b - 1],
                        DeviceId::Satellite => run.micro.sat_hz,
                    };
                    if total - transmission - compute > 1e-12 {
                        tally.queued += 1;
                    }
                }
                Fate::Dropped { .. } => tally.dropped += 1,
                Fate::Expired { .. } => tally.expired += 1,
                Fate::Unreachable { .. } => tally.unreachable += 1,
                Fate::Unfinished => tally.unfinished += 1,
            }
        }
    }
    let exercised = tally.on_time > 0
        && tally.queued > 0
        && tally.dropped > 0
        && tally.expired > 0
        && tally.unreachable > 0
        && tally.unfinished > 0;
    Verdict::new(
        mismatches.is_empty() && exercised,
        format!(
            "{compared} scenarios ({} drawn), fates {tally:?}; mismatches: {}",
            index,
            if mismatches.is_empty() {
                "none".to_string()
            } else {
                mismatches.join("; ")
            }
        ),
    )
}

/// Backward pass against central differences for parameters and inputs.
pub fn gradient_check() -> Verdict {
    let h = 1e-6;
    let floor = 1e-4;
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    for i in 0..GRAD_NETS {
        let mut r = rng(5000 + i);
        let mut net = random_net(&mut r);
        let batch = r.random_range(1..=3);
        let input = random_matrix(batch, net.input_dim(), 2.0, &mut r);
        let weights = random_matrix(batch, net.output_dim(), 1.0, &mut r);
        let cache = net.forward_batch(&input).unwrap();
        let grads = net.backward(&cache, &weights).unwrap();

        let mut params = net.params().to_vec();
        let stride = (params.len() / 400).max(1);
        for p in (0..params.len()).step_by(stride) {
            let numeric = central(&mut params, p, h, |x| {
                net.params_mut().copy_from_slice(x);
                weighted_output(&net, &input, &weights)
            });
            worst = worst.max(rel_err(grads.params[p], numeric, floor));
            checked += 1;
        }
        net.params_mut().copy_from_slice(&params);
        let mut x = input.as_slice().to_vec();
        for p in 0..x.len() {
            let numeric = central(&mut x, p, h, |v| {
                weighted_output(&net, &Matrix::from_vec(batch, net.input_dim(), v.to_vec()), &weights)
            });
            worst = worst.max(rel_err(grads.input.as_slice()[p], numeric, floor));
            checked += 1;
        }
    }
    Verdict::new(
        worst < GRAD_TOL,
        format!("{GRAD_NETS} random nets, {checked} partials, max rel err {worst:.2e}"),
    )
}

/// The actor loss as the library defines it, evaluated forward only.
pub fn actor_loss(
    actor: &DenseNet,
    k: usize,
    critic: &DenseNet,
    layout: &JointLayout,
    batch: &[&Transition],
    penalty: f64,
) -> f64 {
    let rows: Vec<&Transition> = batch.iter().copied().filter(|t| t.mask[k] > 0.5).collect();
    let n = rows.len() as f64;
    let mut q = 0.0;
    let mut sq = 0.0;
    for t in &rows {
        let obs = &t.obs[k * layout.obs_dim..(k + 1) * layout.obs_dim];
        let (out, cache) = actor.forward(obs).unwrap();
        sq += cache.raw().as_slice().iter().map(|z| z * z).sum::<f64>();
        let mut row = vec![0.0; layout.input_dim()];
        layout.write_input(&t.obs, &t.actions, &t.mask, &mut row);
        let at = layout.act_offset(k);
        row[at..at + layout.act_dim].copy_from_slice(&out);
        q += critic.forward(&row).unwrap().0[0];
    }
    -q / n + penalty * sq / (n * layout.act_dim as f64)
}

pub fn random_batch<R: Rng>(layout: &JointLayout, n: usize, r: &mut R) -> Vec<Transition> {
    (0..n)
        .map(|_| {
            let mask: Vec<f64> = (0..layout.agents).map(|_| if r.random_bool(0.75) { 1.0 } else { 0.0 }).collect();
            Transition {
                obs: (0..layout.agents * layout.obs_dim).map(|_| r.random_range(-1.0..=1.0)).collect(),
                actions: (0..layout.agents * layout.act_dim).map(|_| r.random_range(0.0..=1.0)).collect(),
                mask: mask.clone(),
                reward: r.random_range(-1.0..=1.0),
                next_obs: (0..layout.agents * layout.obs_dim).map(|_| r.random_range(-1.0..=1.0)).collect(),
                next_mask: mask,
                done: r.random_bool(0.1),
            }
        })
        .collect()
}

/// The actor gradient taken through the critic, with and without the
/// logit penalty, against central differences of the actor loss.
pub fn chained_gradient_check() -> Verdict {
    let h = 1e-6;
    let floor = 1e-4;
    let mut worst = 0.0f64;
    let mut checked = 0;
    for i in 0..20u64 {
        let mut r = rng(7000 + i);
        let n_dev = r.random_range(2..=6);
        let layout = JointLayout {
            agents: r.random_range(1..=3),
            obs_dim: r.random_range(2..=8),
            act_dim: n_dev + 1,
            with_mask: r.random_bool(0.5),
        };
        let hidden = r.random_range(4..=32);
        let mut actor = DenseNet::new(
            &[layout.obs_dim, hidden, layout.act_dim],
            vec![OutputHead::Softmax(n_dev), OutputHead::Sigmoid(1)],
            &mut r,
        )
        .unwrap();
        let critic = DenseNet::new(
            &[layout.input_dim(), r.random_range(4..=48), r.random_range(4..=48), 1],
            vec![OutputHead::Identity(1)],
            &mut r,
        )
        .unwrap();
        let mut batch = random_batch(&layout, r.random_range(2..=12), &mut r);
        let k = r.random_range(0..layout.agents);
        batch[0].mask[k] = 1.0;
        let refs: Vec<&Transition> = batch.iter().collect();
        for penalty in [0.0, 0.05] {
            let (_, grad) = actor_gradient(&actor, k, &critic, &layout, &refs, penalty).unwrap().unwrap();
            let mut params = actor.params().to_vec();
            for p in 0..params.len() {
                let numeric = central(&mut params, p, h, |x| {
                    actor.params_mut().copy_from_slice(x);
                    actor_loss(&actor, k, &critic, &layout, &refs, penalty)
                });
                worst = worst.max(rel_err(grad[p], numeric, floor));
                checked += 1;
            }
            actor.params_mut().copy_from_slice(&params);
        }
    }
    Verdict::new(
        worst < GRAD_TOL,
        format!("20 actor/critic pairs, {checked} partials, max rel err {worst:.2e}"),
    )
}

pub fn soft_update_blend() -> Verdict {
    let mut r = rng(8);
    let sizes = [5, 16, 3];
    let heads = || vec![OutputHead::Identity(3)];
    let source = DenseNet::new(&sizes, heads(), &mut r).unwrap();
    let start = DenseNet::new(&sizes, heads(), &mut r).unwrap();
    let mut failures = Vec::new();
    for tau in [0.0, 0.01, 1.0] {
        let mut target = start.clone();
        soft_update(&mut target, &source, tau).unwrap();
        let ok = target
            .params()
            .iter()
            .zip(source.params().iter().zip(start.params()))
            .all(|(t, (s, o))| *t == tau * s + (1.0 - tau) * o);
        if !ok {
            failures.push(tau);
        }
    }
    Verdict::new(failures.is_empty(), format!("tau in {{0, 0.01, 1}}, inexact blends at {failures:?}"))
}

pub fn undiscounted_target() -> Verdict {
    let mut r = rng(9);
    let layout = JointLayout {
        agents: 3,
        obs_dim: 4,
        act_dim: 4,
        with_mask: true,
    };
    let critic = DenseNet::new(&[layout.input_dim(), 16, 1], vec![OutputHead::Identity(1)], &mut r).unwrap();
    let actors: Vec<DenseNet> = (0..3)
        .map(|_| DenseNet::new(&[4, 8, 4], vec![OutputHead::Softmax(3), OutputHead::Sigmoid(1)], &mut r).unwrap())
        .collect();
    let refs: Vec<&DenseNet> = actors.iter().collect();
    let batch = random_batch(&layout, 32, &mut r);
    let b: Vec<&Transition> = batch.iter().collect();
    let y = critic_target(&critic, &refs, &layout, &b, 0.0).unwrap();
    let ok = y.iter().zip(&batch).all(|(y, t)| *y == t.reward);
    Verdict::new(ok, "gamma 0 over 32 random transitions")
}

pub fn zero_loss_keeps_critic() -> Verdict {
    let mut r = rng(10);
    let layout = JointLayout {
        agents: 2,
        obs_dim: 3,
        act_dim: 4,
        with_mask: true,
    };
    let mut critic = DenseNet::new(&[layout.input_dim(), 24, 1], vec![OutputHead::Identity(1)], &mut r).unwrap();
    let batch = random_batch(&layout, 16, &mut r);
    let b: Vec<&Transition> = batch.iter().collect();
    let inputs: Vec<Vec<f64>> = batch
        .iter()
        .map(|t| {
            let mut row = vec![0.0; layout.input_dim()];
            layout.write_input(&t.obs, &t.actions, &t.mask, &mut row);
            row
        })
        .collect();
    let targets: Vec<f64> = inputs.iter().map(|x| critic.forward(x).unwrap().0[0]).collect();
    let before = critic.params().to_vec();
    let mut opt = AdamState::new(critic.param_count(), AdamConfig::with_learning_rate(1e-3));
    let loss = critic_update(&mut critic, &mut opt, &layout, &b, &targets).unwrap();
    Verdict::new(
        loss == 0.0 && critic.params() == before.as_slice(),
        format!("loss {loss}, parameters unchanged: {}", critic.params() == before.as_slice()),
    )
}

/// The priority output climbs to the peak of `Q = -(a - 0.7)^2`.
pub fn bowl_convergence() -> Verdict {
    use sagin_sched::marl::{actor_update, ActionValue, AgentBundle, TrainConfig};
    use sagin_sched::Result;

    struct Bowl {
        col: usize,
        peak: f64,
    }

    impl ActionValue for Bowl {
        fn values(&self, input: &Matrix) -> Result<Vec<f64>> {
            Ok((0..input.rows()).map(|r| -(input.get(r, self.col) - self.peak).powi(2)).collect())
        }

        fn values_and_input_grad(&self, input: &Matrix) -> Result<(Vec<f64>, Matrix)> {
            let mut g = Matrix::zeros(input.rows(), input.cols());
            for r in 0..input.rows() {
                g.set(r, self.col, -2.0 * (input.get(r, self.col) - self.peak));
            }
            Ok((self.values(input)?, g))
        }
    }

    let mut r = rng(11);
    let layout = JointLayout {
        agents: 1,
        obs_dim: 6,
        act_dim: 5,
        with_mask: false,
    };
    let cfg = TrainConfig::default();
    let mut agent = AgentBundle::new(0, 6, 4, &cfg, &mut r, stream_indexed(11, Stream::Noise, 0)).unwrap();
    let bowl = Bowl {
        col: layout.act_offset(0) + 4,
        peak: 0.7,
    };
    let mut batch = random_batch(&layout, 32, &mut r);
    for t in &mut batch {
        t.mask = vec![1.0];
    }
    let refs: Vec<&Transition> = batch.iter().collect();
    let spread = |a: &AgentBundle| {
        refs.iter()
            .map(|t| (a.actor.forward(&t.obs).unwrap().0[4] - 0.7).abs())
            .fold(0.0, f64::max)
    };
    for step in 1..=BOWL_MAX_STEPS {
        actor_update(&mut agent, 0, &bowl, &layout, &refs, 0.0).unwrap();
        let s = spread(&agent);
        if s < BOWL_TOL {
            return Verdict::new(true, format!("within {s:.4} of the optimum after {step} updates"));
        }
    }
    Verdict::new(false, format!("still {:.4} away after {BOWL_MAX_STEPS} updates", spread(&agent)))
}
