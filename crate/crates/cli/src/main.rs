fn main() {
    std::process::exit(driftbench_cli::cli::main_with_args(std::env::args_os()));
}
