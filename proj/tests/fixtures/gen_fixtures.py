#!/usr/bin/env python3
"""Writes the HAR, cookies.txt and label fixtures under tests/fixtures/.

The traces in corpus/traces.jsonl are produced from these with the CLI
(corpus/build_corpus.sh) so the ingest path is what builds them.
"""
import base64
import json
import pathlib

ROOT = pathlib.Path(__file__).resolve().parent

GIF_1X1 = bytes.fromhex(
    "47494638396101000100800000000000ffffff21f90401000000002c00000000010001000002024401003b")

SITES = [
    ("bluewave-post.com", "left", "desktop", "Bluewave Post", 120000),
    ("progressive-daily.org", "left", "desktop", "Progressive Daily", 80000),
    ("middle-ground.com", "centre", "desktop", "Middle Ground", 95000),
    ("plain-record.org", "centre", "desktop", "Plain Record", ""),
    ("redline-report.com", "right", "desktop", "Redline Report", 150000),
    ("liberty-herald.org", "right", "desktop", "Liberty Herald", 60000),
    ("bluewave-post.com", "left", "mobile", "Bluewave Post", 120000),
]

TP_TOKENS = {
    "adnexus-exchange.com": "3f2a9c1e-77b4-4d0e-9a51-c2e8d41b7f06",
    "metricflow.com": "mf.8c41d2e9b7a3",
}


def header(name, value):
    return {"name": name, "value": value}


def entry(started, url, status=200, mime="text/html", req_headers=(), resp_headers=(), body=None,
          redirect=""):
    content = {"size": len(body) if body else 0, "mimeType": mime}
    if body is not None:
        content["text"] = base64.b64encode(body).decode()
        content["encoding"] = "base64"
    resp = [header("Content-Type", mime)] + list(resp_headers)
    if body is not None:
        resp.append(header("Content-Length", str(len(body))))
    return {
        "startedDateTime": started,
        "time": 12,
        "request": {"method": "GET", "url": url, "httpVersion": "HTTP/1.1",
                    "headers": list(req_headers), "cookies": [], "queryString": [],
                    "headersSize": -1, "bodySize": 0},
        "response": {"status": status, "statusText": "", "httpVersion": "HTTP/1.1",
                     "headers": resp, "cookies": [], "content": content,
                     "redirectURL": redirect, "headersSize": -1, "bodySize": content["size"]},
        "cache": {}, "timings": {"send": 0, "wait": 10, "receive": 2},
    }


def site_har(site, crawl, day):
    t = lambda s: f"2020-07-{day:02d}T10:00:{s:02d}.000Z"
    page = f"https://www.{site}/"
    fp_token = "fp-" + "".join(format(ord(c), "x") for c in site[:8])
    adx = TP_TOKENS["adnexus-exchange.com"]
    mf = TP_TOKENS["metricflow.com"]
    entries = [
        entry(t(0), page, body=b"<html><body>news</body></html>",
              resp_headers=[header("Set-Cookie", f"_fpid={fp_token}; Max-Age=31536000; Path=/"),
                            header("Set-Cookie", "sess=abc; Path=/")]),
        entry(t(1), "https://cdn.adnexus-exchange.com/tag.js", mime="application/javascript",
              req_headers=[header("Referer", page)], body=b"void 0;",
              resp_headers=[header("Set-Cookie",
                                   f"uid={adx}; Domain=.adnexus-exchange.com; Path=/; "
                                   "Expires=Wed, 30 Jun 2021 10:00:00 GMT")]),
        entry(t(2), f"https://sync.bidstream.net/match?src=adx&uid={adx}",
              mime="image/gif", req_headers=[header("Referer", "https://cdn.adnexus-exchange.com/")],
              body=GIF_1X1),
        entry(t(3), "https://t.metricflow.com/collect?v=1", mime="text/plain",
              req_headers=[header("Referer", page)], body=b"ok",
              resp_headers=[header("Set-Cookie", f"_mf={mf}; Domain=metricflow.com; Max-Age=63072000")]),
        entry(t(4), "https://t.metricflow.com/sync", status=302, mime="text/plain",
              req_headers=[header("Referer", page)],
              resp_headers=[header("Location", f"https://cm.clickgrid.io/set?partner=mf&puid={mf}")],
              redirect=f"https://cm.clickgrid.io/set?partner=mf&puid={mf}"),
        entry(t(5), f"https://cm.clickgrid.io/set?partner=mf&puid={mf}", status=204, mime="image/gif",
              req_headers=[header("Referer", page)]),
        entry(t(6), "https://px.doubleclick.net/b/p.gif?e=pv", mime="image/gif",
              req_headers=[header("Referer", page)], body=GIF_1X1),
        entry(t(7), f"https://www.{site}/img/lead.jpg", mime="image/jpeg",
              req_headers=[header("Referer", page)],
              resp_headers=[header("Content-Length", "48213")]),
    ]
    return {"log": {"version": "1.2", "creator": {"name": "fixture", "version": "1"},
                    "pages": [{"startedDateTime": t(0), "id": "page_1", "title": site,
                               "pageTimings": {}}],
                    "entries": entries}}


def cookies_txt():
    lines = [
        "# Netscape HTTP Cookie File",
        "# exported from a phone session",
        "",
        ".bluewave-post.com\tTRUE\t/\tFALSE\t1625133600\t_fpid\tfp-mobile-0042",
        "#HttpOnly_.bluewave-post.com\tTRUE\t/\tTRUE\t0\tsession\tz9",
        ".adnexus-exchange.com\tTRUE\t/\tTRUE\t1625133600\tuid\t" + TP_TOKENS["adnexus-exchange.com"],
        ".metricflow.com\tTRUE\t/\tFALSE\t1656669600\t_mf\t" + TP_TOKENS["metricflow.com"],
        "broken line without tabs",
    ]
    return "\n".join(lines) + "\n"


def main():
    (ROOT / "har").mkdir(exist_ok=True)
    (ROOT / "cookies").mkdir(exist_ok=True)
    (ROOT / "corpus").mkdir(exist_ok=True)
    for site, _, platform, _, _ in SITES:
        if platform != "desktop":
            continue
        for crawl, day in ((1, 1), (2, 10)):
            path = ROOT / "har" / f"{site}.stateful-{crawl}.har"
            path.write_text(json.dumps(site_har(site, crawl, day), indent=1) + "\n")
    (ROOT / "cookies" / "bluewave-post.com.mobile.txt").write_text(cookies_txt())
    rows = ["site_id,leaning,platform,display_name,followers"]
    rows += [f"{s},{l},{p},{n},{f}" for s, l, p, n, f in SITES]
    (ROOT / "corpus" / "labels.csv").write_text("\n".join(rows) + "\n")


if __name__ == "__main__":
    main()
