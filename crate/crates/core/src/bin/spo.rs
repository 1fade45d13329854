fn main() {
    std::process::exit(spo_core::cli::run(std::env::args_os()));
}
