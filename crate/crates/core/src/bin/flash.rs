fn main() {
    std::process::exit(flash::cli::run(std::env::args_os()));
}
