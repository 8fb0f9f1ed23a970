fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ASAB_LOG", "warn")).init();
    std::process::exit(asab::app::run_from(std::env::args_os()));
}
