import os
import subprocess
import sys


def main():
    """启动筛选结果浏览器；可选参数为输出目录"""
    current_dir = os.path.dirname(os.path.abspath(__file__))
    os.chdir(current_dir)

    env = os.environ.copy()
    if len(sys.argv) > 1:
        env['CURATION_OUTPUT_DIR'] = os.path.abspath(sys.argv[1])

    subprocess.run([sys.executable, "-m", "streamlit", "run", "app.py"], env=env)


if __name__ == "__main__":
    main()
