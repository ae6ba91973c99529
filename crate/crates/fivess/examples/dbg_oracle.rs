// temporary debug: final scenario validation
use fivess::scenario::*;
use fivess::scheduler::OperatingPointGrid;
use fivess::presets;
use std::time::Instant;

fn main() {
    let p = presets::table2_boost();
    let grid = OperatingPointGrid::new(vec![20.0, 25.0, 30.0, 35.0, 40.0], 2.6).unwrap();
    let t0 = Instant::now();
    let out = run_staircase(&p, &grid, 20.0, 40.0, &large_step_spec(), DEFAULT_COMMAND_LIMITS, 40000).unwrap();
    println!("staircase {:?}: switches={}", t0.elapsed(), out.switch_events.len());
    for s in &out.steps {
        println!("  {:>4.1}->{:>4.1}: rise={:?} os={:+.4} advanced={}", s.v_from, s.v_to,
            s.metrics.rise_time_10_90.map(|r| (r*1e9).round()/1e3), s.metrics.sigma_t_v, s.advanced);
    }
    let t1 = Instant::now();
    let ls = run_load_step(&p, 40.0, 40.0*40.0/22.4, &large_step_spec(), DEFAULT_COMMAND_LIMITS, 400, 3000).unwrap();
    println!("load step {:?}: max_dev={:.4} V ({:.2}%) recovered={}", t1.elapsed(), ls.max_deviation, ls.max_deviation/40.0*100.0, ls.recovered);
    let t2 = Instant::now();
    let sweep = model_error_sweep(&p, 40.0, &[0.5, 1.0, 2.0, 4.0, 6.0, 8.0], 3000).unwrap();
    println!("sweep {:?}: {:?}", t2.elapsed(), sweep.iter().map(|x| (x.step_v, (x.e_w_percent*1000.0).round()/1000.0)).collect::<Vec<_>>());
}
