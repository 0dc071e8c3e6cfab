fn main() {
    std::process::exit(hermite_vasicek::cli::cli_main(std::env::args_os()));
}
