fn main() {
    println!("decov");
}
