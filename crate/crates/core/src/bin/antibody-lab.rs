fn main() {
    std::process::exit(antibody_lab::cli::run(std::env::args_os()));
}
