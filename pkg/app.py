import os
import logging
from flask import Flask
from flask_sqlalchemy import SQLAlchemy
from sqlalchemy.orm import DeclarativeBase
from werkzeug.middleware.proxy_fix import ProxyFix

from config import SimulationConfig

logging.basicConfig(
    level=os.environ.get("LOG_LEVEL", "INFO").upper(),
    format="%(asctime)s %(levelname)s %(name)s: %(message)s",
)


class Base(DeclarativeBase):
    pass


db = SQLAlchemy(model_class=Base)

app = Flask(__name__)
app.secret_key = os.environ.get("SESSION_SECRET", "radiogossip-dev-secret")
app.wsgi_app = ProxyFix(app.wsgi_app, x_proto=1, x_host=1)

# Simulator defaults live under GOSSIP_* keys; routes read them back with SimulationConfig.from_mapping
app.config.update(SimulationConfig.from_env().to_flask())
app.config.update(
    MAX_CONTENT_LENGTH=4 * 1024 * 1024,
    MAX_API_NODES=int(os.environ.get("MAX_API_NODES", "256")),
    SQLALCHEMY_DATABASE_URI=os.environ.get("DATABASE_URL", "sqlite:///radiogossip.db"),
    SQLALCHEMY_ENGINE_OPTIONS={"pool_recycle": 300, "pool_pre_ping": True},
)
db.init_app(app)

from cli import gossip_cli  # noqa: E402
app.cli.add_command(gossip_cli)

with app.app_context():
    import models  # noqa: F401
    import routes  # noqa: F401

    db.create_all()
    logging.getLogger(__name__).info(
        f"Radio gossip service ready, default broadcast {app.config['GOSSIP_BROADCAST']}"
    )
