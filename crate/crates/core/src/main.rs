fn main() {
    std::process::exit(imputation_audit::cli::main_with_args(std::env::args_os()));
}
