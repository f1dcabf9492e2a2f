use parchr::bench::{Benchmark, Instance};
use parchr::engine::{run, run_checked, validate_trace, Processors, RunConfig, Strategy};
use parchr::report::emit_csv;

fn small_size(b: Benchmark) -> usize {
    match b {
        Benchmark::Sat => 3,
        Benchmark::Floyd => 7,
        Benchmark::Uf => 5,
        _ => 6,
    }
}

fn config(inst: &Instance, strategy: Strategy, processors: Processors, seed: u64) -> RunConfig {
    RunConfig::new(inst.program.clone(), inst.goal.clone())
        .strategy(strategy)
        .processors(processors)
        .seed(seed)
        .max_steps(inst.benchmark.default_max_steps())
}

#[test]
fn every_benchmark_replays_and_meets_its_oracle() {
    for b in Benchmark::ALL {
        let n = small_size(b);
        for variant in b.spec().variants.iter().map(|v| Some(*v)).chain([None]) {
            let inst = Instance::new(b, variant, n, 2).unwrap();
            for strategy in Strategy::ALL {
                for p in [Processors::Unbounded, Processors::Bounded(1), Processors::Bounded(3)] {
                    let trace = run(&config(&inst, strategy, p, 2)).unwrap();
                    let label = format!("{b}:{variant:?} {strategy} {p}");
                    assert_eq!(validate_trace(&inst.program, &inst.goal, &trace), Ok(()), "{label}");
                    assert_eq!(inst.oracle(&trace.final_store), Ok(()), "{label}");
                }
            }
        }
    }
}

#[test]
fn online_and_offline_replay_agree() {
    let inst = Instance::new(Benchmark::Msort, None, 12, 4).unwrap();
    for strategy in Strategy::ALL {
        let cfg = config(&inst, strategy, Processors::Bounded(4), 4);
        let offline = run(&cfg).unwrap();
        let (online, replay) = run_checked(&cfg).unwrap();
        assert_eq!(replay, Ok(()));
        assert!(online.applied.is_empty());
        assert_eq!(emit_csv(&online), emit_csv(&offline));
        assert_eq!(online.final_store, offline.final_store);
    }
}

#[test]
fn runs_are_reproducible_from_the_seed() {
    let inst = Instance::new(Benchmark::Blocks, Some("2"), 8, 11).unwrap();
    let cfg = config(&inst, Strategy::Parr, Processors::Bounded(2), 11);
    let a = run(&cfg).unwrap();
    let b = run(&cfg).unwrap();
    assert_eq!(emit_csv(&a), emit_csv(&b));
    assert_eq!(a.final_store, b.final_store);
}

#[test]
fn one_processor_takes_one_rule_per_step() {
    let inst = Instance::new(Benchmark::Primes, None, 15, 0).unwrap();
    for strategy in Strategy::ALL {
        let trace = run(&config(&inst, strategy, Processors::Bounded(1), 0)).unwrap();
        assert!(trace.steps.iter().all(|s| s.applied <= 1), "{strategy}");
    }
}
