from flask.cli import FlaskGroup

from eyeaffect import create_app

app = create_app()


def main() -> None:
    """``python run.py <stage> ...`` runs a pipeline stage; ``run`` serves the read-only API."""
    FlaskGroup(create_app=create_app)()


if __name__ == '__main__':
    main()
