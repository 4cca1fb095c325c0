//! Small sweep over the haverly instances, printed as an objective-increase table.

use rsbb::cli::{increase_table, resolve_instance, run_sweep, Method, RunResult};
use rsbb::rsbb::SolveConfig;
use rsbb::uncertainty::SetKind;

fn main() {
    let instances: Vec<_> = ["haverly1", "haverly2", "haverly3"]
        .iter()
        .map(|n| resolve_instance(n).unwrap())
        .collect();
    let kinds = [SetKind::Box, SetKind::Ellipsoidal, SetKind::Polyhedral];
    let sizes = [0.0, 0.1, 0.2];
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let cells = run_sweep(&instances, Method::Rsbb, &kinds, &sizes, &SolveConfig::default(), jobs);
    let results: Vec<RunResult> = cells.into_iter().map(|(r, _)| r).collect();
    print!("{}", increase_table(&results, &kinds, &sizes));
}
