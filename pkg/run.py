from unmtlab.app import create_app  # ✅ Entry point for the unmtlab CLI
cli = create_app()

if __name__ == '__main__':
    cli()
