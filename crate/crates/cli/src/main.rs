fn main() {
    std::process::exit(sameproj_cli::run(std::env::args_os()));
}
