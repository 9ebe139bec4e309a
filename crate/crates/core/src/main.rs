fn main() {
    std::process::exit(rydberg_jc::io::cli::cli_main(std::env::args_os()));
}
