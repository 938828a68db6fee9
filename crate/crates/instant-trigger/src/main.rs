fn main() {
    env_logger::init();
    std::process::exit(instant_trigger::cli::run());
}
