fn main() {
    std::process::exit(phreact::run_cli(std::env::args_os()));
}
