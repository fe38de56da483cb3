// placeholder; populated once the fixture pipeline is wired up
int main() { return 0; }
