fn main() {
    std::process::exit(exclusion_lab::cli::run(std::env::args_os()));
}
