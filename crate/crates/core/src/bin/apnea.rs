fn main() {
    std::process::exit(apnea_radar::cli::main());
}
