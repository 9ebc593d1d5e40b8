from commands import cli


def main():
    cli(prog_name="dicke-ed")


if __name__ == "__main__":
    main()
