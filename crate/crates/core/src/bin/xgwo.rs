fn main() {
    std::process::exit(xgwo_svm::cli::main_from_env());
}
