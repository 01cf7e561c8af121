fn main() {
    std::process::exit(wsn_anomaly::cli::run());
}
