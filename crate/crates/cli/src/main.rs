fn main() {
    std::process::exit(expagg_cli::main_with_args(std::env::args_os()));
}
