fn main() {
    std::process::exit(bolab_cli::run(std::env::args_os()));
}
