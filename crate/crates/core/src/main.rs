use std::process::ExitCode;

fn main() -> ExitCode {
    if let Some(n) = std::env::var("CUSPLAB_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
    {
        // an already initialised pool keeps its size
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    ExitCode::from(cusplab::cli::run_command(std::env::args_os()) as u8)
}
