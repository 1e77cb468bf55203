fn main() {
    std::process::exit(hdlss_energy::cli::run(std::env::args_os()));
}
