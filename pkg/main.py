import os

from app import app  # noqa: F401

if __name__ == '__main__':
    app.run(host='0.0.0.0', port=int(os.environ.get('PORT', '5005')),
            debug=os.environ.get('FLASK_DEBUG', '0') == '1')
