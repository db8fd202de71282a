fn main() {
    std::process::exit(qsm_core::cli::main_with_args(std::env::args_os()));
}
