fn main() {
    std::process::exit(csi_traffic::cli::run(std::env::args_os()));
}
